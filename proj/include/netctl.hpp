#pragma once

#include "netctl/errors.hpp"
#include "netctl/experiment.hpp"
#include "netctl/gramian.hpp"
#include "netctl/io.hpp"
#include "netctl/linalg.hpp"
#include "netctl/network.hpp"
#include "netctl/oracle.hpp"
#include "netctl/rng.hpp"
#include "netctl/trajectory.hpp"

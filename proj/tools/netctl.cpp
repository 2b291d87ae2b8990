// netctl — command-line front end for the minimum-energy network control
// library. Every verb emits a manifest (tool, version, verb, fully-resolved
// config, config hash) so a run can be reproduced exactly from its output.
//
// Exit codes: 0 success, 2 config error (nothing written), 3 numerical
// failure (outputs, if any, are flagged "partial" in the manifest).

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "netctl.hpp"

namespace {

using nlohmann::json;
using namespace netctl;
using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr const char* kTool = "netctl";
constexpr const char* kVersion = "1.0.0";

// ---- config plumbing -------------------------------------------------------

// Merges a JSON config file under the CLI flags: a flag given on the command
// line always wins; a key present in the file fills in everything else.
class config_merge {
  public:
    config_merge(CLI::App* sub, const std::string& path) : sub_(sub) {
        if (path.empty()) return;
        std::ifstream f(path);
        if (!f) throw config_error("cannot open config file: " + path);
        try {
            j_ = json::parse(f);
        } catch (const std::exception& e) {
            throw config_error(std::string("config file is not valid JSON: ") + e.what());
        }
        if (!j_.is_object()) throw config_error("config file must hold a JSON object");
        loaded_ = true;
    }

    template <typename T>
    void merge(const std::string& flag, const std::string& key, T& target) {
        known_.insert(key);
        if (!loaded_) return;
        auto it = j_.find(key);
        if (it == j_.end()) return;
        used_.insert(key);
        if (sub_->get_option(flag)->count() > 0) return;  // flag wins
        try {
            target = it->get<T>();
        } catch (const std::exception&) {
            throw config_error("config key '" + key + "' has the wrong type");
        }
    }

    bool had(const std::string& key) const { return used_.count(key) > 0; }

    // unknown keys are config errors, not silent typos
    void finish() const {
        if (!loaded_) return;
        for (const auto& item : j_.items())
            if (!known_.count(item.key()))
                throw config_error("unknown config key: " + item.key());
    }

  private:
    CLI::App* sub_;
    json j_;
    bool loaded_ = false;
    std::set<std::string> known_, used_;
};

struct common_opts {
    std::string out = "-";
    std::string config_path;
    std::uint64_t seed = 1;
    int workers = 0;  // 0 => machine parallelism
};

void add_common(CLI::App* sub, common_opts& c) {
    sub->add_option("--out", c.out, "output file, or - for stdout")
        ->capture_default_str();
    sub->add_option("--config", c.config_path,
                    "JSON config file; command-line flags override its keys");
    sub->add_option("--seed", c.seed,
                    "master seed (fallback: config file, then env NETCTL_SEED, then 1)");
    sub->add_option("--workers", c.workers,
                    "max concurrent tasks (0 = machine parallelism)");
}

// seed resolution: flag > config file > NETCTL_SEED > 1
void resolve_common(CLI::App* sub, config_merge& cm, common_opts& c) {
    cm.merge("--out", "out", c.out);
    cm.merge("--workers", "workers", c.workers);
    cm.merge("--seed", "seed", c.seed);
    if (sub->get_option("--seed")->count() == 0 && !cm.had("seed")) {
        if (const char* env = std::getenv("NETCTL_SEED")) {
            try {
                std::size_t pos = 0;
                c.seed = std::stoull(env, &pos);
                if (env[pos] != '\0') throw std::invalid_argument("");
            } catch (const std::exception&) {
                throw config_error("NETCTL_SEED is not an unsigned integer");
            }
        }
    }
    if (c.workers <= 0) {
        const unsigned hw = std::thread::hardware_concurrency();
        c.workers = hw ? static_cast<int>(hw) : 1;
    }
}

// ---- system specification --------------------------------------------------

struct system_spec {
    std::string file;  // load if non-empty, otherwise generate
    int n = 7;
    double avg_degree = 4.0;
    int drivers = 1;
    double lambda1 = std::numeric_limits<double>::quiet_NaN();  // NaN => no shift
};

void add_system_opts(CLI::App* sub, system_spec& sp, bool loadable) {
    if (loadable)
        sub->add_option("--system", sp.file, "system JSON file (from gen-system)");
    sub->add_option("--n", sp.n, "number of nodes")->capture_default_str();
    sub->add_option("--avg-degree", sp.avg_degree, "mean number of incoming links per node")
        ->capture_default_str();
    sub->add_option("--drivers", sp.drivers, "number of driver nodes")
        ->capture_default_str();
    sub->add_option("--lambda1", sp.lambda1,
                    "shift the spectrum so the largest real part equals this");
}

void merge_system_opts(config_merge& cm, system_spec& sp, bool loadable) {
    if (loadable) cm.merge("--system", "system", sp.file);
    cm.merge("--n", "n", sp.n);
    cm.merge("--avg-degree", "avg_degree", sp.avg_degree);
    cm.merge("--drivers", "drivers", sp.drivers);
    cm.merge("--lambda1", "lambda1", sp.lambda1);
}

network_system load_system(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw config_error("cannot open system file: " + path);
    json j;
    try {
        j = json::parse(f);
    } catch (const std::exception& e) {
        throw config_error(std::string("system file is not valid JSON: ") + e.what());
    }
    if (j.contains("system")) j = j["system"];
    network_system s;
    try {
        const int n = j.at("n").get<int>();
        const auto a = j.at("A").get<std::vector<double>>();
        if (static_cast<int>(a.size()) != n * n)
            throw config_error("system file: A must hold n*n entries row-major");
        s.A.resize(n, n);
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < n; ++k) s.A(i, k) = a[static_cast<std::size_t>(i * n + k)];
        s.drivers = j.at("drivers").get<std::vector<int>>();
        for (int d : s.drivers)
            if (d < 0 || d >= n) throw config_error("system file: driver index out of range");
        s.B = driver_matrix(n, s.drivers);
        s.lambda1 = spectral_abscissa(s.A);
    } catch (const config_error&) {
        throw;
    } catch (const std::exception& e) {
        throw config_error(std::string("system file: ") + e.what());
    }
    return s;
}

network_system resolve_system(const system_spec& sp, std::uint64_t seed) {
    if (!sp.file.empty()) return load_system(sp.file);
    if (sp.n < 2) throw config_error("--n must be at least 2");
    if (!(sp.avg_degree > 0.0)) throw config_error("--avg-degree must be positive");
    if (sp.drivers < 1 || sp.drivers > sp.n)
        throw config_error("--drivers must be between 1 and n");
    network_system s;
    s.A = erdos_renyi(sp.n, sp.avg_degree, seed);
    if (!std::isnan(sp.lambda1)) s.A = shift_spectrum(s.A, sp.lambda1);
    s.drivers = pick_drivers(s.A, sp.drivers, seed);
    s.B = driver_matrix(sp.n, s.drivers);
    s.lambda1 = spectral_abscissa(s.A);
    return s;
}

// state spec: "zero" | "random:<norm>" | comma-separated components
VectorXd parse_state(const std::string& spec, int n, std::uint64_t seed,
                     std::uint64_t tag) {
    if (spec == "zero") return VectorXd::Zero(n);
    if (spec.rfind("random:", 0) == 0) {
        double norm = 0;
        try {
            std::size_t pos = 0;
            norm = std::stod(spec.substr(7), &pos);
            if (pos != spec.size() - 7) throw std::invalid_argument("");
        } catch (const std::exception&) {
            throw config_error("bad state spec (want random:<norm>): " + spec);
        }
        rng g(seed, {stream::state, tag});
        return norm * g.sphere(n);
    }
    std::vector<double> vals;
    std::stringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            std::size_t pos = 0;
            vals.push_back(std::stod(tok, &pos));
            if (pos != tok.size()) throw std::invalid_argument("");
        } catch (const std::exception&) {
            throw config_error("bad state component '" + tok + "' in: " + spec);
        }
    }
    if (static_cast<int>(vals.size()) != n)
        throw config_error("state spec has " + std::to_string(vals.size()) +
                           " components, system has " + std::to_string(n));
    return Eigen::Map<VectorXd>(vals.data(), n);
}

// ---- output emission -------------------------------------------------------

void emit_manifest_head(json_writer& w, const char* verb, const std::string& config) {
    w.begin_object();
    w.kv("tool", kTool).kv("version", kVersion).kv("verb", verb);
    w.key("config").raw(config);
    w.kv("config_hash", config_hash(config));
}

void emit_system_config(json_writer& w, const system_spec& sp) {
    if (!sp.file.empty()) {
        w.kv("system", sp.file);
        return;
    }
    w.kv("n", sp.n).kv("avg_degree", sp.avg_degree).kv("drivers", sp.drivers);
    w.key("lambda1");
    if (std::isnan(sp.lambda1))
        w.raw("null");
    else
        w.value(sp.lambda1);
}

void emit_system(json_writer& w, const network_system& s) {
    const int n = static_cast<int>(s.A.rows());
    w.key("system").begin_object();
    w.kv("n", n);
    w.key("drivers").begin_array();
    for (int d : s.drivers) w.value(d);
    w.end_array();
    w.kv("lambda1", s.lambda1);
    w.key("A").begin_array();
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) w.value(s.A(i, k));
    w.end_array();
    w.end_object();
}

void emit_vector(json_writer& w, const char* key, const VectorXd& v) {
    w.key(key).begin_array();
    for (Eigen::Index i = 0; i < v.size(); ++i) w.value(v[i]);
    w.end_array();
}

void emit_points(json_writer& w, const char* key, const char* param_name,
                 const std::vector<sweep_point>& pts) {
    w.key(key).begin_array();
    for (const auto& p : pts) {
        w.begin_object();
        w.kv(param_name, p.param);
        w.kv("mean_L", p.mean_L).kv("mean_R", p.mean_R).kv("mean_E", p.mean_E);
        w.kv("n_valid", p.n_valid).kv("n_total", p.n_total).kv("computed", p.computed);
        w.end_object();
    }
    w.end_array();
}

void emit_fit(json_writer& w, const char* key, const fit_result& f) {
    w.key(key).begin_object();
    w.kv("slope", f.slope).kv("intercept", f.intercept).kv("r2", f.r2);
    w.end_object();
}

void emit_stats(json_writer& w, const char* key, const trajectory_stats& s) {
    w.key(key).begin_object();
    w.kv("L", s.L).kv("R", s.R).kv("E", s.E).kv("delta", s.delta);
    w.kv("endpoint_rel", s.endpoint_rel).kv("dL", s.dL).kv("dR", s.dR);
    w.kv("valid", s.valid);
    w.end_object();
}

void write_file(const std::string& path, const std::string& payload) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw config_error("cannot open output file: " + path);
    f << payload;
    f.flush();
    if (!f) throw std::runtime_error("write failed: " + path);
}

// single sink per run: everything is serialized first, written once
void write_output(const std::string& out, const std::string& payload) {
    if (out == "-") {
        std::cout << payload << std::endl;
        return;
    }
    write_file(out, payload + "\n");
}

bool any_partial(const std::vector<sweep_point>& pts) {
    for (const auto& p : pts)
        if (!p.computed || p.n_valid < p.n_total) return true;
    return false;
}

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// ---- verbs -----------------------------------------------------------------

int run_gen_system(CLI::App* sub, common_opts& c, system_spec& sp) {
    config_merge cm(sub, c.config_path);
    resolve_common(sub, cm, c);
    merge_system_opts(cm, sp, false);
    cm.finish();

    json_writer cw;
    cw.begin_object();
    cw.kv("seed", c.seed);
    emit_system_config(cw, sp);
    cw.end_object();
    const std::string config = cw.str();

    const network_system sys = resolve_system(sp, c.seed);

    json_writer w;
    emit_manifest_head(w, "gen-system", config);
    w.kv("partial", false);
    emit_system(w, sys);
    w.end_object();
    write_output(c.out, w.str());
    return 0;
}

struct trajectory_opts {
    double tf = 1.0;
    std::string x0 = "zero";
    std::string xf;
    double xf_random_delta = std::numeric_limits<double>::quiet_NaN();
    int samples = 0;
};

int run_trajectory(CLI::App* sub, common_opts& c, system_spec& sp,
                   trajectory_opts& t) {
    config_merge cm(sub, c.config_path);
    resolve_common(sub, cm, c);
    merge_system_opts(cm, sp, true);
    cm.merge("--tf", "tf", t.tf);
    cm.merge("--x0", "x0", t.x0);
    cm.merge("--xf", "xf", t.xf);
    cm.merge("--xf-random-delta", "xf_random_delta", t.xf_random_delta);
    cm.merge("--samples", "samples", t.samples);
    cm.finish();

    if (!(t.tf > 0.0)) throw config_error("--tf must be positive");
    const bool have_delta = !std::isnan(t.xf_random_delta);
    if (t.xf.empty() == !have_delta)
        throw config_error("give exactly one of --xf and --xf-random-delta");
    if (have_delta && !(t.xf_random_delta > 0.0))
        throw config_error("--xf-random-delta must be positive");
    if (t.samples != 0 && t.samples < 2)
        throw config_error("--samples must be 0 (no sampling) or at least 2");

    json_writer cw;
    cw.begin_object();
    cw.kv("seed", c.seed);
    emit_system_config(cw, sp);
    cw.kv("tf", t.tf).kv("x0", t.x0);
    if (have_delta)
        cw.kv("xf_random_delta", t.xf_random_delta);
    else
        cw.kv("xf", t.xf);
    cw.kv("samples", t.samples);
    cw.end_object();
    const std::string config = cw.str();

    const network_system sys = resolve_system(sp, c.seed);
    const int n = static_cast<int>(sys.A.rows());
    const VectorXd x0 = parse_state(t.x0, n, c.seed, 0);
    const VectorXd xf = have_delta
        ? VectorXd(x0 + t.xf_random_delta * direction_sample(c.seed, 0, 0, n))
        : parse_state(t.xf, n, c.seed, 1);

    const control_kernel ker(sys.A, sys.B, t.tf);
    MatrixXd G;
    const auto st = ker.solve(x0, xf, G);
    const trajectory_stats& s = st[0];

    MatrixXd states, inputs;
    if (t.samples > 0) ker.dense_states(x0, G.col(0), t.samples - 1, states, inputs);

    json_writer w;
    emit_manifest_head(w, "trajectory", config);
    w.kv("partial", !s.valid);
    emit_system(w, sys);
    emit_vector(w, "x0", x0);
    emit_vector(w, "xf", xf);
    w.kv("sigma_ratio", ker.sigma_ratio());
    w.kv("endpoint_certified", ker.endpoint_certified());
    emit_stats(w, "stats", s);

    std::string csv;
    if (t.samples > 0) {
        const int m = static_cast<int>(sys.B.cols());
        const double h = t.tf / (t.samples - 1);
        csv += "t";
        for (int i = 1; i <= n; ++i) csv += ",x" + std::to_string(i);
        for (int i = 1; i <= m; ++i) csv += ",u" + std::to_string(i);
        csv += ",speed\n";
        w.key("samples").begin_object();
        w.key("t").begin_array();
        for (int i = 0; i < t.samples; ++i) w.value(i * h);
        w.end_array();
        w.key("x").begin_array();
        for (int i = 0; i < t.samples; ++i) {
            w.begin_array();
            for (int k = 0; k < n; ++k) w.value(states(k, i));
            w.end_array();
        }
        w.end_array();
        w.key("u").begin_array();
        for (int i = 0; i < t.samples; ++i) {
            w.begin_array();
            for (int k = 0; k < m; ++k) w.value(inputs(k, i));
            w.end_array();
        }
        w.end_array();
        w.key("speed").begin_array();
        for (int i = 0; i < t.samples; ++i) {
            const VectorXd xdot = sys.A * states.col(i) + sys.B * inputs.col(i);
            w.value(xdot.norm());
            csv += fmt17(i * h);
            for (int k = 0; k < n; ++k) csv += "," + fmt17(states(k, i));
            for (int k = 0; k < m; ++k) csv += "," + fmt17(inputs(k, i));
            csv += "," + fmt17(xdot.norm()) + "\n";
        }
        w.end_array();
        w.end_object();
    }
    w.end_object();

    if (t.samples > 0 && c.out != "-") {
        // CSV at --out, full JSON document as sidecar next to it
        write_file(c.out, csv);
        write_file(c.out + ".json", w.str() + "\n");
    } else {
        write_output(c.out, w.str());
    }
    return s.valid ? 0 : 3;
}

struct sweep_delta_opts {
    double tf = 1.0;
    double x0_norm = 0.0;
    double delta_min = 1e-5, delta_max = 1e5;
    int per_decade = 10;
    int ensemble = 100;
};

void validate_grid(double lo, double hi, int per_decade) {
    if (!(lo > 0.0) || !(hi > lo)) throw config_error("need 0 < grid min < grid max");
    if (per_decade < 1) throw config_error("--per-decade must be at least 1");
}

int run_sweep_delta(CLI::App* sub, common_opts& c, system_spec& sp,
                    sweep_delta_opts& o) {
    config_merge cm(sub, c.config_path);
    resolve_common(sub, cm, c);
    merge_system_opts(cm, sp, true);
    cm.merge("--tf", "tf", o.tf);
    cm.merge("--x0-norm", "x0_norm", o.x0_norm);
    cm.merge("--delta-min", "delta_min", o.delta_min);
    cm.merge("--delta-max", "delta_max", o.delta_max);
    cm.merge("--per-decade", "per_decade", o.per_decade);
    cm.merge("--ensemble", "ensemble", o.ensemble);
    cm.finish();

    if (!(o.tf > 0.0)) throw config_error("--tf must be positive");
    if (o.x0_norm < 0.0) throw config_error("--x0-norm must be non-negative");
    validate_grid(o.delta_min, o.delta_max, o.per_decade);
    if (o.ensemble < 1) throw config_error("--ensemble must be at least 1");

    json_writer cw;
    cw.begin_object();
    cw.kv("seed", c.seed);
    emit_system_config(cw, sp);
    cw.kv("tf", o.tf).kv("x0_norm", o.x0_norm);
    cw.kv("delta_min", o.delta_min).kv("delta_max", o.delta_max);
    cw.kv("per_decade", o.per_decade).kv("ensemble", o.ensemble);
    cw.end_object();
    const std::string config = cw.str();

    const network_system sys = resolve_system(sp, c.seed);
    const int n = static_cast<int>(sys.A.rows());
    VectorXd x0 = VectorXd::Zero(n);
    if (o.x0_norm > 0.0) {
        rng g(c.seed, {stream::state, 0});
        x0 = o.x0_norm * g.sphere(n);
    }
    const auto grid = log_grid(o.delta_min, o.delta_max, o.per_decade);
    sweep_options sopt;
    sopt.ensemble = o.ensemble;
    sopt.workers = c.workers;
    const auto pts = sweep_delta(sys, o.tf, x0, grid, c.seed, sopt);

    json_writer w;
    emit_manifest_head(w, "sweep-delta", config);
    w.kv("partial", any_partial(pts));
    emit_system(w, sys);
    emit_vector(w, "x0", x0);
    emit_points(w, "points", "delta", pts);
    w.end_object();
    write_output(c.out, w.str());
    return any_partial(pts) ? 3 : 0;
}

struct sweep_x0_opts {
    double tf = 1.0;
    std::vector<double> x0_norms = {1e-2, 1e-1, 1.0, 10.0, 100.0};
    double delta_min = 1e-5, delta_max = 1e5;
    int per_decade = 20;
    int ensemble = 100;
    double gap_tol = 1e-2;
};

int run_sweep_x0(CLI::App* sub, common_opts& c, system_spec& sp, sweep_x0_opts& o) {
    config_merge cm(sub, c.config_path);
    resolve_common(sub, cm, c);
    merge_system_opts(cm, sp, true);
    cm.merge("--tf", "tf", o.tf);
    cm.merge("--x0-norms", "x0_norms", o.x0_norms);
    cm.merge("--delta-min", "delta_min", o.delta_min);
    cm.merge("--delta-max", "delta_max", o.delta_max);
    cm.merge("--per-decade", "per_decade", o.per_decade);
    cm.merge("--ensemble", "ensemble", o.ensemble);
    cm.merge("--gap-tol", "gap_tol", o.gap_tol);
    cm.finish();

    if (!(o.tf > 0.0)) throw config_error("--tf must be positive");
    if (o.x0_norms.empty()) throw config_error("--x0-norms must not be empty");
    for (double v : o.x0_norms)
        if (!(v > 0.0)) throw config_error("--x0-norms entries must be positive");
    validate_grid(o.delta_min, o.delta_max, o.per_decade);
    if (o.ensemble < 1) throw config_error("--ensemble must be at least 1");
    if (!(o.gap_tol > 0.0)) throw config_error("--gap-tol must be positive");

    json_writer cw;
    cw.begin_object();
    cw.kv("seed", c.seed);
    emit_system_config(cw, sp);
    cw.kv("tf", o.tf);
    cw.key("x0_norms").numbers(o.x0_norms);
    cw.kv("delta_min", o.delta_min).kv("delta_max", o.delta_max);
    cw.kv("per_decade", o.per_decade).kv("ensemble", o.ensemble);
    cw.kv("gap_tol", o.gap_tol);
    cw.end_object();
    const std::string config = cw.str();

    const network_system sys = resolve_system(sp, c.seed);
    const int n = static_cast<int>(sys.A.rows());
    rng g(c.seed, {stream::state, 0});
    const VectorXd xhat = g.sphere(n);
    const auto grid = log_grid(o.delta_min, o.delta_max, o.per_decade);
    sweep_options sopt;
    sopt.ensemble = o.ensemble;
    sopt.workers = c.workers;

    const auto origin = sweep_delta(sys, o.tf, VectorXd::Zero(n), grid, c.seed, sopt);
    bool partial = any_partial(origin);

    struct norm_result {
        double norm = 0;
        std::optional<std::size_t> cross;
        double L_star = 0, R_star = 0;
        std::vector<sweep_point> pts;
    };
    std::vector<norm_result> per_norm;
    std::vector<double> ns, ds, ls, rs;
    for (double norm : o.x0_norms) {
        norm_result r;
        r.norm = norm;
        r.pts = sweep_delta(sys, o.tf, VectorXd(norm * xhat), grid, c.seed, sopt);
        partial = partial || any_partial(r.pts);
        r.cross = crossover_index(r.pts, origin, o.gap_tol);
        if (r.cross) {
            const double dstar = grid[*r.cross];
            r.L_star = plateau_mean(r.pts, dstar, false);
            r.R_star = plateau_mean(r.pts, dstar, true);
            ns.push_back(norm);
            ds.push_back(dstar);
            ls.push_back(r.L_star);
            rs.push_back(r.R_star);
        } else {
            partial = true;
        }
        per_norm.push_back(std::move(r));
    }

    auto powfit = [](const std::vector<double>& x, const std::vector<double>& y) {
        const auto nn = static_cast<Eigen::Index>(x.size());
        return fit_power(Eigen::Map<const VectorXd>(x.data(), nn),
                         Eigen::Map<const VectorXd>(y.data(), nn));
    };

    json_writer w;
    emit_manifest_head(w, "sweep-x0", config);
    w.kv("partial", partial);
    emit_system(w, sys);
    emit_vector(w, "x0_direction", xhat);
    emit_points(w, "origin", "delta", origin);
    w.key("per_norm").begin_array();
    for (const auto& r : per_norm) {
        w.begin_object();
        w.kv("x0_norm", r.norm);
        w.key("delta_star");
        if (r.cross)
            w.value(grid[*r.cross]);
        else
            w.raw("null");
        w.kv("L_star", r.L_star).kv("R_star", r.R_star);
        emit_points(w, "points", "delta", r.pts);
        w.end_object();
    }
    w.end_array();
    if (ns.size() >= 2) {
        w.key("fits").begin_object();
        emit_fit(w, "delta_star", powfit(ns, ds));
        emit_fit(w, "L_star", powfit(ns, ls));
        emit_fit(w, "R_star", powfit(ns, rs));
        w.end_object();
    }
    w.end_object();
    write_output(c.out, w.str());
    return partial ? 3 : 0;
}

struct sweep_time_opts {
    double delta = 1e-3;
    double x0_norm = 0.0;
    double tf_min = 1e-2, tf_max = 1e2;
    int per_decade = 10;
    int ensemble = 100;
};

int run_sweep_time(CLI::App* sub, common_opts& c, system_spec& sp,
                   sweep_time_opts& o) {
    config_merge cm(sub, c.config_path);
    resolve_common(sub, cm, c);
    merge_system_opts(cm, sp, true);
    cm.merge("--delta", "delta", o.delta);
    cm.merge("--x0-norm", "x0_norm", o.x0_norm);
    cm.merge("--tf-min", "tf_min", o.tf_min);
    cm.merge("--tf-max", "tf_max", o.tf_max);
    cm.merge("--per-decade", "per_decade", o.per_decade);
    cm.merge("--ensemble", "ensemble", o.ensemble);
    cm.finish();

    if (!(o.delta > 0.0)) throw config_error("--delta must be positive");
    if (o.x0_norm < 0.0) throw config_error("--x0-norm must be non-negative");
    validate_grid(o.tf_min, o.tf_max, o.per_decade);
    if (o.ensemble < 1) throw config_error("--ensemble must be at least 1");

    json_writer cw;
    cw.begin_object();
    cw.kv("seed", c.seed);
    emit_system_config(cw, sp);
    cw.kv("delta", o.delta).kv("x0_norm", o.x0_norm);
    cw.kv("tf_min", o.tf_min).kv("tf_max", o.tf_max);
    cw.kv("per_decade", o.per_decade).kv("ensemble", o.ensemble);
    cw.end_object();
    const std::string config = cw.str();

    const network_system sys = resolve_system(sp, c.seed);
    const int n = static_cast<int>(sys.A.rows());
    VectorXd x0 = VectorXd::Zero(n);
    if (o.x0_norm > 0.0) {
        rng g(c.seed, {stream::state, 0});
        x0 = o.x0_norm * g.sphere(n);
    }
    const auto grid = log_grid(o.tf_min, o.tf_max, o.per_decade);
    sweep_options sopt;
    sopt.ensemble = o.ensemble;
    sopt.workers = c.workers;
    const auto pts = sweep_time(sys, o.delta, x0, grid, c.seed, sopt);

    json_writer w;
    emit_manifest_head(w, "sweep-time", config);
    w.kv("partial", any_partial(pts));
    emit_system(w, sys);
    emit_vector(w, "x0", x0);
    emit_points(w, "points", "tf", pts);
    w.end_object();
    write_output(c.out, w.str());
    return any_partial(pts) ? 3 : 0;
}

struct direction_scan_opts {
    double tf = 1e-2;
    std::string x0 = "random:1";
    double delta_min = 1e-4, delta_max = 1e2;
    int per_decade = 10;
};

int run_direction_scan(CLI::App* sub, common_opts& c, system_spec& sp,
                       direction_scan_opts& o) {
    config_merge cm(sub, c.config_path);
    resolve_common(sub, cm, c);
    merge_system_opts(cm, sp, true);
    cm.merge("--tf", "tf", o.tf);
    cm.merge("--x0", "x0", o.x0);
    cm.merge("--delta-min", "delta_min", o.delta_min);
    cm.merge("--delta-max", "delta_max", o.delta_max);
    cm.merge("--per-decade", "per_decade", o.per_decade);
    cm.finish();

    if (!(o.tf > 0.0)) throw config_error("--tf must be positive");
    validate_grid(o.delta_min, o.delta_max, o.per_decade);

    json_writer cw;
    cw.begin_object();
    cw.kv("seed", c.seed);
    emit_system_config(cw, sp);
    cw.kv("tf", o.tf).kv("x0", o.x0);
    cw.kv("delta_min", o.delta_min).kv("delta_max", o.delta_max);
    cw.kv("per_decade", o.per_decade);
    cw.end_object();
    const std::string config = cw.str();

    const network_system sys = resolve_system(sp, c.seed);
    const int n = static_cast<int>(sys.A.rows());
    const VectorXd x0 = parse_state(o.x0, n, c.seed, 0);
    const VectorXd vhat = direction_sample(c.seed, 0, 0, n);
    const auto grid = log_grid(o.delta_min, o.delta_max, o.per_decade);
    sweep_options sopt;
    sopt.workers = c.workers;
    const branch_pair bp = direction_pair_scan(sys, o.tf, x0, vhat, grid, sopt);

    json_writer w;
    emit_manifest_head(w, "direction-scan", config);
    w.kv("partial", false);
    emit_system(w, sys);
    emit_vector(w, "x0", x0);
    emit_vector(w, "direction", vhat);
    w.key("delta").numbers(bp.grid);
    w.key("L_plus").numbers(bp.L_plus);
    w.key("L_minus").numbers(bp.L_minus);
    w.key("fits").begin_object();
    emit_fit(w, "plus", bp.plus);
    emit_fit(w, "minus_below", bp.minus_below);
    emit_fit(w, "minus_above", bp.minus_above);
    w.kv("a_plus", bp.a_plus).kv("b_plus", bp.b_plus);
    w.kv("a_minus", bp.a_minus).kv("b_minus", bp.b_minus);
    w.kv("breakpoint", bp.breakpoint);
    w.end_object();
    w.kv("swapped", bp.swapped);
    w.end_object();
    write_output(c.out, w.str());
    return 0;
}

struct distribution_opts {
    double tf = 1e-2;
    std::string x0 = "zero";
    double delta = 1e-5;
    int count = 100;
};

int run_distribution(CLI::App* sub, common_opts& c, system_spec& sp,
                     distribution_opts& o) {
    config_merge cm(sub, c.config_path);
    resolve_common(sub, cm, c);
    merge_system_opts(cm, sp, true);
    cm.merge("--tf", "tf", o.tf);
    cm.merge("--x0", "x0", o.x0);
    cm.merge("--delta", "delta", o.delta);
    cm.merge("--count", "count", o.count);
    cm.finish();

    if (!(o.tf > 0.0)) throw config_error("--tf must be positive");
    if (!(o.delta > 0.0)) throw config_error("--delta must be positive");
    if (o.count < 2) throw config_error("--count must be at least 2");

    json_writer cw;
    cw.begin_object();
    cw.kv("seed", c.seed);
    emit_system_config(cw, sp);
    cw.kv("tf", o.tf).kv("x0", o.x0).kv("delta", o.delta).kv("count", o.count);
    cw.end_object();
    const std::string config = cw.str();

    const network_system sys = resolve_system(sp, c.seed);
    const int n = static_cast<int>(sys.A.rows());
    const VectorXd x0 = parse_state(o.x0, n, c.seed, 0);
    const auto d = distribution_at(sys, o.tf, x0, o.delta, o.count, c.seed);
    const bool partial = d.n_invalid > 0;

    auto vmax = [](const std::vector<double>& v) {
        double m = 0;
        for (double x : v) m = std::max(m, x);
        return m;
    };
    auto vmin = [](const std::vector<double>& v) {
        double m = std::numeric_limits<double>::infinity();
        for (double x : v) m = std::min(m, x);
        return m;
    };

    json_writer w;
    emit_manifest_head(w, "distribution", config);
    w.kv("partial", partial);
    emit_system(w, sys);
    emit_vector(w, "x0", x0);
    w.kv("n_invalid", d.n_invalid);
    w.key("L").numbers(d.L);
    w.key("R").numbers(d.R);
    if (!d.L.empty()) {
        const double rL = vmax(d.L) / 2.0, rR = vmax(d.R) / 2.0;
        w.key("ks").begin_object();
        w.kv("r_L", rL).kv("r_R", rR);
        w.kv("arcsine_L", ks_arcsine(d.L, rL));
        w.kv("arcsine_R", ks_arcsine(d.R, rR));
        w.kv("uniform_L", ks_uniform(d.L, vmin(d.L), vmax(d.L)));
        w.kv("uniform_R", ks_uniform(d.R, vmin(d.R), vmax(d.R)));
        w.end_object();
    }
    w.end_object();
    write_output(c.out, w.str());
    return partial ? 3 : 0;
}

struct oracle_opts {
    double tf = 1.0;
    int m = 200;
    std::string x0 = "zero";
    std::string xf;
    double xf_random_delta = 1.0;
};

int run_oracle_check(CLI::App* sub, common_opts& c, system_spec& sp,
                     oracle_opts& o) {
    config_merge cm(sub, c.config_path);
    resolve_common(sub, cm, c);
    merge_system_opts(cm, sp, true);
    cm.merge("--tf", "tf", o.tf);
    cm.merge("--m", "m", o.m);
    cm.merge("--x0", "x0", o.x0);
    cm.merge("--xf", "xf", o.xf);
    cm.merge("--xf-random-delta", "xf_random_delta", o.xf_random_delta);
    cm.finish();

    if (!(o.tf > 0.0)) throw config_error("--tf must be positive");
    if (o.m < 2) throw config_error("--m must be at least 2");

    json_writer cw;
    cw.begin_object();
    cw.kv("seed", c.seed);
    emit_system_config(cw, sp);
    cw.kv("tf", o.tf).kv("m", o.m).kv("x0", o.x0);
    if (o.xf.empty())
        cw.kv("xf_random_delta", o.xf_random_delta);
    else
        cw.kv("xf", o.xf);
    cw.end_object();
    const std::string config = cw.str();

    const network_system sys = resolve_system(sp, c.seed);
    const int n = static_cast<int>(sys.A.rows());
    const VectorXd x0 = parse_state(o.x0, n, c.seed, 0);
    const VectorXd xf = o.xf.empty()
        ? VectorXd(x0 + o.xf_random_delta * direction_sample(c.seed, 0, 0, n))
        : parse_state(o.xf, n, c.seed, 1);

    const control_kernel ker(sys.A, sys.B, o.tf);
    const trajectory_stats s = ker.evaluate(x0, xf)[0];
    const discrete_plan plan = oracle_min_energy(sys.A, sys.B, o.tf, o.m, x0, xf);
    const bool partial = !s.valid || plan.endpoint_rel > 1e-8;

    json_writer w;
    emit_manifest_head(w, "oracle-check", config);
    w.kv("partial", partial);
    emit_system(w, sys);
    emit_vector(w, "x0", x0);
    emit_vector(w, "xf", xf);
    w.key("continuous").begin_object();
    w.kv("E", s.E).kv("L", s.L).kv("R", s.R).kv("valid", s.valid);
    w.end_object();
    w.key("oracle").begin_object();
    w.kv("E", plan.energy).kv("L", plan.L).kv("R", plan.R);
    w.kv("endpoint_rel", plan.endpoint_rel);
    w.end_object();
    w.key("rel_diff").begin_object();
    w.kv("E", (plan.energy - s.E) / s.E);
    w.kv("L", (plan.L - s.L) / s.L);
    w.kv("R", (plan.R - s.R) / s.R);
    w.end_object();
    w.end_object();
    write_output(c.out, w.str());
    return partial ? 3 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"minimum-energy control of linear network dynamics"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kTool) + " " + kVersion);

    common_opts c_gen, c_traj, c_sd, c_sx, c_st, c_ds, c_di, c_or;
    system_spec s_gen, s_traj, s_sd, s_sx, s_st, s_ds, s_di, s_or;
    trajectory_opts t;
    sweep_delta_opts sd;
    sweep_x0_opts sx;
    sweep_time_opts st;
    direction_scan_opts ds;
    distribution_opts di;
    oracle_opts oc;

    auto* gen = app.add_subcommand("gen-system",
                                   "generate a random controllable system");
    add_common(gen, c_gen);
    add_system_opts(gen, s_gen, false);

    auto* traj = app.add_subcommand("trajectory",
                                    "minimum-energy transfer for one target");
    add_common(traj, c_traj);
    add_system_opts(traj, s_traj, true);
    traj->add_option("--tf", t.tf, "control horizon")->capture_default_str();
    traj->add_option("--x0", t.x0, "initial state: zero | random:<norm> | v1,v2,...")
        ->capture_default_str();
    traj->add_option("--xf", t.xf, "final state: v1,v2,...");
    traj->add_option("--xf-random-delta", t.xf_random_delta,
                     "final state x0 + delta * (random unit direction)");
    traj->add_option("--samples", t.samples,
                     "uniformly sampled states/inputs; with --out FILE this writes "
                     "FILE as CSV and FILE.json as sidecar (0 = none)")
        ->capture_default_str();

    auto* swd = app.add_subcommand("sweep-delta",
                                   "mean L, R, E across a control-distance grid");
    add_common(swd, c_sd);
    add_system_opts(swd, s_sd, true);
    swd->add_option("--tf", sd.tf, "control horizon")->capture_default_str();
    swd->add_option("--x0-norm", sd.x0_norm, "norm of the (random-direction) initial state")
        ->capture_default_str();
    swd->add_option("--delta-min", sd.delta_min, "grid start")->capture_default_str();
    swd->add_option("--delta-max", sd.delta_max, "grid end")->capture_default_str();
    swd->add_option("--per-decade", sd.per_decade, "grid points per decade")
        ->capture_default_str();
    swd->add_option("--ensemble", sd.ensemble, "directions per grid point")
        ->capture_default_str();

    auto* swx = app.add_subcommand(
        "sweep-x0", "distance sweeps across initial-state norms, with crossover fits");
    add_common(swx, c_sx);
    add_system_opts(swx, s_sx, true);
    swx->add_option("--tf", sx.tf, "control horizon")->capture_default_str();
    swx->add_option("--x0-norms", sx.x0_norms, "initial-state norms")
        ->delimiter(',')
        ->capture_default_str();
    swx->add_option("--delta-min", sx.delta_min, "grid start")->capture_default_str();
    swx->add_option("--delta-max", sx.delta_max, "grid end")->capture_default_str();
    swx->add_option("--per-decade", sx.per_decade, "grid points per decade")
        ->capture_default_str();
    swx->add_option("--ensemble", sx.ensemble, "directions per grid point")
        ->capture_default_str();
    swx->add_option("--gap-tol", sx.gap_tol,
                    "log10 gap under which the curves count as merged")
        ->capture_default_str();

    auto* swt = app.add_subcommand("sweep-time",
                                   "mean L, R, E across a control-horizon grid");
    add_common(swt, c_st);
    add_system_opts(swt, s_st, true);
    swt->add_option("--delta", st.delta, "control distance")->capture_default_str();
    swt->add_option("--x0-norm", st.x0_norm, "norm of the (random-direction) initial state")
        ->capture_default_str();
    swt->add_option("--tf-min", st.tf_min, "grid start")->capture_default_str();
    swt->add_option("--tf-max", st.tf_max, "grid end")->capture_default_str();
    swt->add_option("--per-decade", st.per_decade, "grid points per decade")
        ->capture_default_str();
    swt->add_option("--ensemble", st.ensemble, "directions per grid point")
        ->capture_default_str();

    auto* dsc = app.add_subcommand(
        "direction-scan", "L along a fixed target direction and its negation");
    s_ds.n = 2;
    add_common(dsc, c_ds);
    add_system_opts(dsc, s_ds, true);
    dsc->add_option("--tf", ds.tf, "control horizon")->capture_default_str();
    dsc->add_option("--x0", ds.x0, "initial state: zero | random:<norm> | v1,v2,...")
        ->capture_default_str();
    dsc->add_option("--delta-min", ds.delta_min, "grid start")->capture_default_str();
    dsc->add_option("--delta-max", ds.delta_max, "grid end")->capture_default_str();
    dsc->add_option("--per-decade", ds.per_decade, "grid points per decade")
        ->capture_default_str();

    auto* dis = app.add_subcommand("distribution",
                                   "L and R draws over random directions at one distance");
    s_di.n = 2;
    add_common(dis, c_di);
    add_system_opts(dis, s_di, true);
    dis->add_option("--tf", di.tf, "control horizon")->capture_default_str();
    dis->add_option("--x0", di.x0, "initial state: zero | random:<norm> | v1,v2,...")
        ->capture_default_str();
    dis->add_option("--delta", di.delta, "control distance")->capture_default_str();
    dis->add_option("--count", di.count, "number of directions")->capture_default_str();

    auto* orc = app.add_subcommand(
        "oracle-check", "continuous minimum energy against the discrete-time oracle");
    add_common(orc, c_or);
    add_system_opts(orc, s_or, true);
    orc->add_option("--tf", oc.tf, "control horizon")->capture_default_str();
    orc->add_option("--m", oc.m, "discrete oracle steps")->capture_default_str();
    orc->add_option("--x0", oc.x0, "initial state: zero | random:<norm> | v1,v2,...")
        ->capture_default_str();
    orc->add_option("--xf", oc.xf, "final state: v1,v2,...");
    orc->add_option("--xf-random-delta", oc.xf_random_delta,
                    "final state x0 + delta * (random unit direction)")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) return run_gen_system(gen, c_gen, s_gen);
        if (traj->parsed()) return run_trajectory(traj, c_traj, s_traj, t);
        if (swd->parsed()) return run_sweep_delta(swd, c_sd, s_sd, sd);
        if (swx->parsed()) return run_sweep_x0(swx, c_sx, s_sx, sx);
        if (swt->parsed()) return run_sweep_time(swt, c_st, s_st, st);
        if (dsc->parsed()) return run_direction_scan(dsc, c_ds, s_ds, ds);
        if (dis->parsed()) return run_distribution(dis, c_di, s_di, di);
        if (orc->parsed()) return run_oracle_check(orc, c_or, s_or, oc);
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const near_singular_error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const not_controllable_error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 2;  // unreachable: require_subcommand(1)
}

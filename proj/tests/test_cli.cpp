#include <catch2/catch_amalgamated.hpp>

#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>
#include <sys/wait.h>

using nlohmann::json;

namespace {

std::string bin() {
    const char* b = std::getenv("NETCTL_BIN");
    REQUIRE(b != nullptr);
    return b;
}

std::string work_dir() {
    static std::string dir = [] {
        char tmpl[] = "/tmp/netctl_cli_XXXXXX";
        REQUIRE(mkdtemp(tmpl) != nullptr);
        return std::string(tmpl);
    }();
    return dir;
}

struct run_result {
    int code = -1;
    std::string out;
};

// run a shell command, capture stdout, fold the wait status to an exit code
run_result run(const std::string& cmd) {
    run_result r;
    FILE* p = popen((cmd + " 2>/dev/null").c_str(), "r");
    REQUIRE(p != nullptr);
    char buf[4096];
    while (std::size_t k = std::fread(buf, 1, sizeof buf, p)) r.out.append(buf, k);
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool exists(const std::string& path) {
    std::ifstream in(path);
    return in.good();
}

json load(const std::string& path) { return json::parse(slurp(path)); }

}  // namespace

TEST_CASE("gen-system produces a reproducible manifest", "[cli]") {
    const std::string a = work_dir() + "/gen_a.json";
    const std::string b = work_dir() + "/gen_b.json";
    const std::string base =
        bin() + " gen-system --n 5 --avg-degree 3 --lambda1 -1 --seed 11 --out ";
    REQUIRE(run(base + a).code == 0);
    REQUIRE(run(base + b).code == 0);
    CHECK(slurp(a) == slurp(b));  // byte-identical rerun

    const json m = load(a);
    CHECK(m["tool"] == "netctl");
    CHECK(m["verb"] == "gen-system");
    CHECK(m["partial"] == false);
    CHECK(m["config"]["seed"] == 11);
    CHECK(m["config"]["n"] == 5);
    CHECK(m["config_hash"].get<std::string>().size() == 16);
    CHECK(m["system"]["n"] == 5);
    CHECK(m["system"]["drivers"].size() == 1);
    CHECK(std::abs(m["system"]["lambda1"].get<double>() + 1.0) < 1e-9);
    CHECK(m["system"]["A"].size() == 25);  // row-major, n x n

    // a different seed gives a different network
    const std::string c = work_dir() + "/gen_c.json";
    REQUIRE(run(bin() + " gen-system --n 5 --avg-degree 3 --seed 12 --out " + c)
                .code == 0);
    CHECK(load(c)["system"]["A"] != m["system"]["A"]);
}

TEST_CASE("seed resolution: flag beats environment beats default", "[cli]") {
    const std::string f = work_dir() + "/seed.json";
    REQUIRE(run("NETCTL_SEED=777 " + bin() + " gen-system --n 4 --out " + f)
                .code == 0);
    CHECK(load(f)["config"]["seed"] == 777);

    REQUIRE(run("NETCTL_SEED=777 " + bin() +
                " gen-system --n 4 --seed 5 --out " + f)
                .code == 0);
    CHECK(load(f)["config"]["seed"] == 5);

    REQUIRE(run(bin() + " gen-system --n 4 --out " + f).code == 0);
    CHECK(load(f)["config"]["seed"] == 1);
}

TEST_CASE("config file merges under explicit flags", "[cli]") {
    const std::string cfg = work_dir() + "/cfg.json";
    {
        std::ofstream out(cfg);
        out << R"({"n": 5, "avg_degree": 2.5, "seed": 3})";
    }
    const std::string f = work_dir() + "/merged.json";
    REQUIRE(run(bin() + " gen-system --config " + cfg + " --n 4 --out " + f)
                .code == 0);
    const json m = load(f);
    CHECK(m["config"]["n"] == 4);                  // flag wins
    CHECK(m["config"]["avg_degree"] == 2.5);       // file fills the rest
    CHECK(m["config"]["seed"] == 3);

    // unknown keys are configuration errors, not typos to ignore
    {
        std::ofstream out(cfg);
        out << R"({"n": 5, "bogus": 1})";
    }
    const std::string g = work_dir() + "/merged_bad.json";
    CHECK(run(bin() + " gen-system --config " + cfg + " --out " + g).code == 2);
    CHECK_FALSE(exists(g));
}

TEST_CASE("configuration errors write nothing and exit 2", "[cli]") {
    const std::string f = work_dir() + "/bad.json";
    CHECK(run(bin() + " gen-system --n 1 --out " + f).code == 2);
    CHECK_FALSE(exists(f));
    CHECK(run(bin() + " gen-system --no-such-flag --out " + f).code == 2);
    CHECK_FALSE(exists(f));
    CHECK(run(bin() + " trajectory --tf -1 --out " + f).code == 2);
    CHECK_FALSE(exists(f));
}

TEST_CASE("trajectory round trip through a generated system", "[cli]") {
    const std::string sys = work_dir() + "/sys5.json";
    REQUIRE(run(bin() + " gen-system --n 5 --avg-degree 3 --seed 11 --out " +
                sys)
                .code == 0);

    const std::string csv = work_dir() + "/traj.csv";
    const auto r = run(bin() + " trajectory --system " + sys +
                       " --tf 10 --xf-random-delta 1 --samples 40 --out " + csv);
    REQUIRE(r.code == 0);

    // CSV: header plus one row per sample
    const std::string body = slurp(csv);
    CHECK(body.rfind("t,x1,x2,x3,x4,x5,u1,speed\n", 0) == 0);
    int lines = 0;
    for (char ch : body) lines += ch == '\n' ? 1 : 0;
    CHECK(lines == 41);

    // sidecar manifest carries the stats
    const json m = load(csv + ".json");
    CHECK(m["verb"] == "trajectory");
    CHECK(m["partial"] == false);
    CHECK(m["stats"]["valid"] == true);
    const double L = m["stats"]["L"], R = m["stats"]["R"],
                 delta = m["stats"]["delta"];
    CHECK(L >= R * (1.0 - 1e-9));
    CHECK(R >= delta * (1.0 - 1e-6));
    CHECK(m["stats"]["endpoint_rel"].get<double>() <= 1e-6);
    CHECK(m["samples"]["t"].size() == 40);
    CHECK(m["samples"]["x"].size() == 40);
}

TEST_CASE("trajectory refuses an unreachable horizon with exit 3", "[cli]") {
    // deep single-driver cascade over a tiny horizon: conditioning is
    // astronomically beyond double precision, the run must refuse
    const std::string sys = work_dir() + "/sys7.json";
    REQUIRE(run(bin() + " gen-system --out " + sys).code == 0);
    const std::string f = work_dir() + "/traj_hard.json";
    CHECK(run(bin() + " trajectory --system " + sys +
              " --tf 0.01 --xf-random-delta 1 --out " + f)
              .code == 3);
    CHECK_FALSE(exists(f));
}

TEST_CASE("oracle check agrees with the continuous kernel", "[cli]") {
    const std::string sys = work_dir() + "/sys5.json";
    REQUIRE(run(bin() + " gen-system --n 5 --avg-degree 3 --seed 11 --out " +
                sys)
                .code == 0);
    const std::string f = work_dir() + "/oracle.json";
    REQUIRE(run(bin() + " oracle-check --system " + sys +
                " --tf 1 --m 200 --xf-random-delta 2 --out " + f)
                .code == 0);
    const json m = load(f);
    CHECK(m["partial"] == false);
    CHECK(m["continuous"]["valid"] == true);
    CHECK(std::abs(m["rel_diff"]["E"].get<double>()) <= 1e-2);
    CHECK(std::abs(m["rel_diff"]["L"].get<double>()) <= 1e-2);
    CHECK(m["oracle"]["endpoint_rel"].get<double>() <= 1e-8);
    // discretized inputs can only cost more energy
    CHECK(m["rel_diff"]["E"].get<double>() >= -1e-9);
}

TEST_CASE("sweeps are byte-identical across worker counts", "[cli]") {
    const std::string base =
        bin() + " sweep-delta --n 4 --avg-degree 3 --drivers 2 --seed 8"
                " --tf 1 --delta-min 0.1 --delta-max 10 --per-decade 2"
                " --ensemble 6";
    const std::string a = work_dir() + "/sw1.json";
    const std::string b = work_dir() + "/sw4.json";
    REQUIRE(run(base + " --workers 1 --out " + a).code == 0);
    REQUIRE(run(base + " --workers 4 --out " + b).code == 0);
    CHECK(slurp(a) == slurp(b));

    const json m = load(a);
    CHECK(m["partial"] == false);
    REQUIRE(m["points"].size() == 5);  // 2/decade across two decades
    for (const auto& p : m["points"]) {
        CHECK(p["computed"] == true);
        CHECK(p["n_valid"] == 6);
        // L grows with delta and never undershoots it
        CHECK(p["mean_L"].get<double>() >=
              p["delta"].get<double>() * (1.0 - 1e-9));
    }
}

TEST_CASE("distribution manifest carries the draw statistics", "[cli]") {
    const std::string f = work_dir() + "/dist.json";
    REQUIRE(run(bin() + " distribution --seed 3 --delta 1 --count 100 --out " +
                f)
                .code == 0);
    const json m = load(f);
    CHECK(m["partial"] == false);
    CHECK(m["n_invalid"] == 0);
    REQUIRE(m["L"].size() == 100);
    REQUIRE(m["R"].size() == 100);
    CHECK(m["ks"]["arcsine_L"].get<double>() <= 0.15);
    CHECK(m["ks"]["arcsine_R"].get<double>() <= 0.15);
    for (const auto& v : m["L"]) CHECK(v.get<double>() >= 1.0 - 1e-9);
}

TEST_CASE("stdout mode emits the same manifest", "[cli]") {
    const std::string f = work_dir() + "/gen_file.json";
    REQUIRE(run(bin() + " gen-system --n 4 --seed 2 --out " + f).code == 0);
    const auto r = run(bin() + " gen-system --n 4 --seed 2");
    REQUIRE(r.code == 0);
    CHECK(r.out == slurp(f));
}

TEST_CASE("version flag reports the tool identity", "[cli]") {
    const auto r = run(bin() + " --version");
    CHECK(r.code == 0);
    CHECK(r.out.find("netctl") != std::string::npos);
}

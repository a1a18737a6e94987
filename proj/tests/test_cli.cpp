#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
    const std::string cmd = std::string(RCH_CLI_PATH) + " " + args + " 2>/dev/null >/dev/null";
    const int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

std::string run_capture(const std::string& args) {
    const fs::path tmp = fs::temp_directory_path() / "rch_cli_stdout.txt";
    const std::string cmd =
        std::string(RCH_CLI_PATH) + " " + args + " 2>/dev/null >" + tmp.string();
    std::system(cmd.c_str());
    std::ifstream is(tmp);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("rch_test_" + tag);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("simulate writes trajectory CSV and termination JSON deterministically") {
    TempDir d1("sim1"), d2("sim2");
    const std::string common = "simulate --scenario overtaking-r2 --t-end 1.5 --seed 3 --out ";
    REQUIRE(run(common + d1.path.string()) == 0);
    REQUIRE(run(common + d2.path.string()) == 0);

    const fs::path csv1 = d1.path / "overtaking-r2_trajectory.csv";
    const fs::path csv2 = d2.path / "overtaking-r2_trajectory.csv";
    REQUIRE(fs::exists(csv1));
    const std::string a = slurp(csv1), b = slurp(csv2);
    CHECK(a == b);  // identical config and seed => bitwise identical CSV
    CHECK(a.rfind("t,Q1,Q2,P1,P2,uhat1,uhat2,H,min_gap\n", 0) == 0);

    const std::string term = slurp(d1.path / "overtaking-r2_termination.json");
    CHECK(term.find("ReachedEnd") != std::string::npos);
}

TEST_CASE("simulate records snapshots and svg plots on request") {
    TempDir d("snap");
    REQUIRE(run("simulate --scenario overtaking-r2 --t-end 1 --snapshots 0.5 "
                "--formats csv,json,svg --out " +
                d.path.string()) == 0);
    CHECK(fs::exists(d.path / "overtaking-r2_snapshot_t0.5.csv"));
    const std::string svg = slurp(d.path / "overtaking-r2_snapshot_t0.5.svg");
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(fs::exists(d.path / "overtaking-r2_trajectory.svg"));
}

TEST_CASE("simulate detects the antisymmetric collision") {
    TempDir d("col");
    REQUIRE(run("simulate --scenario antisym-r2 --out " + d.path.string()) == 0);
    const std::string term = slurp(d.path / "antisym-r2_termination.json");
    CHECK(term.find("CollisionDetected") != std::string::npos);
    CHECK(term.find("t_collision_estimate") != std::string::npos);
}

TEST_CASE("simulate accepts a config file and rejects bad ones") {
    TempDir d("cfg");
    const fs::path cfg = d.path / "run.json";
    {
        std::ofstream os(cfg);
        os << R"({"spec_version":1,"name":"tiny","r":2.0,"Q0":[0.0],"uhat0":[1.0],)"
           << R"("t_end":0.5,"integrator":{"scheme":"rk4","dt":0.01}})";
    }
    REQUIRE(run("simulate --config " + cfg.string() + " --out " + d.path.string()) == 0);
    CHECK(fs::exists(d.path / "tiny_trajectory.csv"));

    const fs::path bad = d.path / "bad.json";
    {
        std::ofstream os(bad);
        os << R"({"name":"x"})";
    }
    CHECK(run("simulate --config " + bad.string() + " --out " + d.path.string()) == 2);
    CHECK(run("simulate --scenario no-such-thing --out " + d.path.string()) == 2);
}

TEST_CASE("profile subcommand dumps samples and JSON") {
    TempDir d("prof");
    REQUIRE(run("profile --r 2 --Q 0 --uhat 1 --grid -5:5:11 --out " + d.path.string()) == 0);
    const std::string csv = slurp(d.path / "profile_samples.csv");
    CHECK(csv.rfind("x,u\n", 0) == 0);
    // the middle sample is the peak, u(0) = 1
    CHECK(csv.find("\n0,1\n") != std::string::npos);
    const std::string js = slurp(d.path / "profile.json");
    CHECK(js.find("\"uhat\"") != std::string::npos);

    CHECK(run("profile --r 2 --Q 0,5 --P 3,2 --out " + d.path.string()) == 0);
    CHECK(run("profile --r 2 --Q 0,5 --out " + d.path.string()) == 2);  // no heights or momenta
}

TEST_CASE("verify r1-forms suite reports the stated-x3 defect but passes") {
    const std::string out = run_capture("verify --suite r1-forms");
    CHECK(out.find("\"pass\": true") != std::string::npos);
    CHECK(out.find("r1-x3-stated-form") != std::string::npos);
    CHECK(out.find("\"expected_fail\": true") != std::string::npos);
    CHECK(run("verify --suite r1-forms") == 0);
    CHECK(run("verify --suite bogus") == 2);
}

TEST_CASE("sweep prints a CSV table") {
    const std::string out = run_capture("sweep --kind collision-time --r 2");
    CHECK(out.rfind("r,t_collision\n", 0) == 0);
    CHECK(out.find("\n2,") != std::string::npos);
}

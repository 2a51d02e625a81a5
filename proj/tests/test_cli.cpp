#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <gtest/gtest.h>

#include "kinetic/app/commands.hpp"

using namespace kinetic;
using namespace kinetic::app;

namespace {

std::string config_path(const std::string& name) { return std::string(KINETIC_CONFIG_DIR) + "/" + name; }

std::string read_file(const std::filesystem::path& p)
{
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct RunResult
{
    int code = -1;
    std::string output;
};

RunResult run_lab(const std::string& args)
{
    const std::string cmd = std::string(KINETIC_LAB_PATH) + " " + args + " 2>&1";
    RunResult r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe)
        return r;
    std::array<char, 4096> buf{};
    while (std::fgets(buf.data(), buf.size(), pipe))
        r.output += buf.data();
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::filesystem::path scratch(const std::string& name)
{
    auto dir = std::filesystem::temp_directory_path() / ("kinetic_cli_" + name);
    std::filesystem::remove_all(dir);
    return dir;
}

} // namespace

TEST(Config, RoundTripAllPresets)
{
    for (const char* name : {"stretch.cfg", "damped.cfg", "damped_offset.cfg", "schrodinger_free.cfg", "rotation_2pi.cfg",
                             "traceless_perturb.cfg", "schrodinger_perturb.cfg", "cat_map.cfg"}) {
        const ExperimentConfig c = load_config(config_path(name));
        EXPECT_EQ(parse_config(serialize_config(c)), c) << name;
    }
    ExperimentConfig odd;
    odd.rotation = 0.1 + 0.2;
    odd.beta = {1.0 / 3.0, -2e-300, 0.0, 7.5};
    odd.eps = std::numeric_limits<double>::infinity();
    EXPECT_EQ(parse_config(serialize_config(odd)), odd);
}

TEST(Config, FieldLevelErrors)
{
    auto message = [](const std::string& text) {
        try {
            parse_config(text);
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    EXPECT_NE(message("roof.H0 = 2\n").find("roof.H0"), std::string::npos);
    EXPECT_NE(message("p = 0.5\n").find("'p'"), std::string::npos);
    EXPECT_NE(message("colour = red\n").find("colour"), std::string::npos);
    EXPECT_NE(message("beta = 1,2,3,4,5\n").find("beta"), std::string::npos);
    EXPECT_NE(message("T = abc\n").find("'T'"), std::string::npos);
    EXPECT_EQ(parse_config("beta = 1,2\n").beta, (std::array<double, 4>{1.0, 2.0, 0.0, 0.0}));
    EXPECT_NE(message("generator = traceless\nalpha = 1,0,0,0\n").find("alpha"), std::string::npos);
    EXPECT_THROW(load_config("/nonexistent/kinetic.cfg"), ConfigError);
}

TEST(Simulate, CsvHeaderAndSpectrum)
{
    ExperimentConfig c = load_config(config_path("stretch.cfg"));
    const auto dir = scratch("simulate");
    c.out = dir.string();
    const CommandResult r = cmd_simulate(c);
    EXPECT_EQ(r.exit_code, 0);
    const std::string csv = read_file(dir / "finite_time.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,lambda1_ft,lambda2_ft,logdet_avg");
    EXPECT_NEAR(r.report["spectrum"]["lambda1"].get<double>(), 1.0, 1e-3);
    EXPECT_NEAR(r.report["spectrum"]["lambda2"].get<double>(), -1.0, 1e-3);
    EXPECT_FALSE(r.report.contains("wall_clock_s"));
    EXPECT_TRUE(std::filesystem::exists(dir / "report.json"));
}

TEST(Simulate, ConstantPresets)
{
    CommandOptions quiet;
    quiet.write_files = false;
    const CommandResult d = cmd_simulate(load_config(config_path("damped.cfg")), quiet);
    EXPECT_NEAR(d.report["spectrum"]["lambda1"].get<double>(), 0.0, 1e-2);
    EXPECT_NEAR(d.report["spectrum"]["lambda2"].get<double>(), -0.5, 1e-2);
    const CommandResult s = cmd_simulate(load_config(config_path("schrodinger_free.cfg")), quiet);
    EXPECT_NEAR(s.report["spectrum"]["lambda1"].get<double>(), 0.0, 1e-2);
    EXPECT_NEAR(s.report["spectrum"]["lambda2"].get<double>(), 0.0, 1e-2);
}

TEST(Perturb, SameSeedByteIdentical)
{
    ExperimentConfig c = load_config(config_path("traceless_perturb.cfg"));
    c.horizon = 2e4;
    const auto dir = scratch("perturb");
    c.out = dir.string();
    const CommandResult a = cmd_perturb(c);
    const std::string first = read_file(dir / "report.json");
    const CommandResult b = cmd_perturb(c);
    EXPECT_EQ(read_file(dir / "report.json"), first);
    EXPECT_EQ(dump_report(a.report), dump_report(b.report));
}

TEST(Perturb, TracelessVerdict)
{
    CommandOptions quiet;
    quiet.write_files = false;
    const CommandResult r = cmd_perturb(load_config(config_path("traceless_perturb.cfg")), quiet);
    EXPECT_EQ(r.exit_code, 0);
    const json& pl = r.report["pipeline"];
    EXPECT_TRUE(r.report["verdict"]["simple"].get<bool>());
    EXPECT_GT(pl["output_spectrum"]["lambda1"].get<double>(), 0.0);
    EXPECT_LT(pl["output_spectrum"]["lambda2"].get<double>(), 0.0);
    EXPECT_LT(pl["sigma_total"].get<double>(), 0.1);
}

TEST(Perturb, SchrodingerPotentialDistance)
{
    CommandOptions quiet;
    quiet.write_files = false;
    const CommandResult r = cmd_perturb(load_config(config_path("schrodinger_perturb.cfg")), quiet);
    EXPECT_EQ(r.exit_code, 0);
    ASSERT_TRUE(r.report.contains("schrodinger"));
    const json& s = r.report["schrodinger"];
    EXPECT_LT(s["potential_distance_Lp"].get<double>(), 0.1);
    EXPECT_LE(s["potential_distance_Lp"].get<double>(), s["potential_distance_bound"].get<double>() * (1.0 + 1e-12));
    EXPECT_TRUE(s["below_eps"].get<bool>());
    for (const auto& row : s["Q_tilde_samples"])
        EXPECT_DOUBLE_EQ(row["Q_tilde_VS"].get<double>(), 3.0);
}

TEST(Distance, Examples)
{
    const ExperimentConfig a = load_config(config_path("damped.cfg"));
    EXPECT_EQ(cmd_distance(a, a).report["sigma"].get<double>(), 0.0);
    EXPECT_DOUBLE_EQ(cmd_distance(a, load_config(config_path("damped_offset.cfg"))).report["sigma"].get<double>(), 0.5);

    ExperimentConfig boxed = a;
    boxed.override_r = 0.2;
    boxed.override_a = 1.0;
    boxed.override_b = 2.0;
    boxed.override_alpha = 0.5;
    boxed.override_beta = 3.0;
    const double m = 0.2 / 3.0, c = 3.0;
    for (double p : {1.0, 2.0}) {
        ExperimentConfig x = a, y = boxed;
        x.p = y.p = p;
        const double hat = c * std::pow(m, 1.0 / p);
        const json r = cmd_distance(x, y).report;
        EXPECT_NEAR(r["sigma_hat"].get<double>(), hat, 1e-12);
        EXPECT_NEAR(r["sigma"].get<double>(), hat / (1.0 + hat), 1e-12);
        EXPECT_TRUE(r["exact"].get<bool>());
    }

    ExperimentConfig other = a;
    other.base = "cat";
    EXPECT_THROW(cmd_distance(a, other), ConfigError);
}

TEST(Binary, VerifyPasses)
{
    const RunResult r = run_lab("verify --seed 1");
    EXPECT_EQ(r.code, 0) << r.output;
    std::size_t rows = 0;
    std::istringstream in(r.output);
    for (std::string line; std::getline(in, line);)
        rows += line.find(" PASS") != std::string::npos;
    EXPECT_GE(rows, 20u);
}

TEST(Binary, CorruptedToleranceFails)
{
    const RunResult r = run_lab("verify --seed 1 --tolerance-scale 0");
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.output.find("first failing invariant"), std::string::npos);
}

TEST(Binary, BadConfigExitsTwo)
{
    const auto dir = scratch("badcfg");
    std::filesystem::create_directories(dir);
    {
        std::ofstream(dir / "bad.cfg") << "roof.H0 = 1.5\n";
    }
    const RunResult r = run_lab("simulate --config " + (dir / "bad.cfg").string());
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.output.find("roof.H0"), std::string::npos);
    EXPECT_EQ(run_lab("distance --config " + config_path("damped.cfg") + " " + config_path("cat_map.cfg")).code, 2);
}

TEST(Binary, SimulateWritesOutputs)
{
    const auto dir = scratch("binsim");
    const RunResult r = run_lab("simulate --config " + config_path("damped.cfg") + " --horizon 1000 --samples 2 --out " +
                                dir.string());
    EXPECT_EQ(r.code, 0) << r.output;
    EXPECT_TRUE(std::filesystem::exists(dir / "report.json"));
    EXPECT_TRUE(std::filesystem::exists(dir / "finite_time.csv"));
}

// kinetic_lab: spectra, perturbation pipeline, distances and invariant checks.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "kinetic/app/commands.hpp"
#include "kinetic/app/config.hpp"
#include "kinetic/app/report.hpp"
#include "kinetic/app/verify.hpp"

namespace {

using namespace kinetic;
using namespace kinetic::app;

constexpr const char* config_help = R"(Config file: one 'key = value' per line, '#' comments.
  base = rotation | cat          rotation = <rho in (0,1)>   (golden mean by default)
  roof = constant | cosine       roof.H0 = 3   roof.c = 0    (H0 - |c| > 2)
  generator = damped | traceless | schrodinger
  alpha = a0,a1,a2,a3            beta = a0,a1,a2,a3          (damped / traceless)
  Q = a0,a1,a2,a3                E = <energy>                (schrodinger: beta = E - Q)
      each field is a0 + a1 cos(2 pi w1) + a2 sin(2 pi w1) + a3 cos(2 pi s / H0)
  p, eps (inf disables the budget), T, step, n_samples, seed, out, r (0: from budget)
  override.r, override.a, override.b, override.alpha, override.beta
      optional constant kinetic override on phi^[a,b)(B_r))";

struct Overrides
{
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::uint64_t> samples;
    std::optional<double> horizon;
    std::optional<double> step;
};

ExperimentConfig load(const std::string& path, const Overrides& o)
{
    ExperimentConfig c = load_config(path);
    if (o.seed) c.seed = *o.seed;
    if (o.out) c.out = *o.out;
    if (o.samples) c.n_samples = *o.samples;
    if (o.horizon) c.horizon = *o.horizon;
    if (o.step) c.step = *o.step;
    validate(c);
    return c;
}

void print_summary(const json& report)
{
    std::cout << dump_report(report);
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Lyapunov spectra of kinetic cocycles over suspension flows"};
    app.footer(config_help);
    app.require_subcommand(1);

    std::vector<std::string> configs;
    Overrides ov;
    bool timing = false;
    double tolerance_scale = 1.0;
    std::uint64_t verify_seed = 1;

    auto add_common = [&](CLI::App* sub, bool many) {
        if (many)
            sub->add_option("--config", configs, "config file (give two)")->required()->expected(2);
        else
            sub->add_option("--config", configs, "config file")->required()->expected(1);
        sub->add_option("--seed", ov.seed, "override the seed");
        sub->add_option("--out", ov.out, "output directory");
        sub->add_option("--samples", ov.samples, "number of orbit samples");
        sub->add_option("--horizon", ov.horizon, "time horizon T");
        sub->add_option("--step", ov.step, "integration step");
        sub->add_flag("--timing", timing, "record wall-clock time in the report");
    };

    CLI::App* simulate = app.add_subcommand("simulate", "Lyapunov spectrum of the configured generator");
    add_common(simulate, false);
    CLI::App* perturb = app.add_subcommand("perturb", "perturbation pipeline A -> A0 -> B0 -> B");
    add_common(perturb, false);
    CLI::App* distance = app.add_subcommand("distance", "sigma_p between the generators of two configs");
    add_common(distance, true);
    CLI::App* verify = app.add_subcommand("verify", "run every invariant suite");
    verify->add_option("--seed", verify_seed, "seed");
    verify->add_option("--tolerance-scale", tolerance_scale, "multiply all tolerances");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_config;
    }

    CommandOptions opt;
    opt.timing = timing;
    try {
        if (*simulate) {
            const CommandResult r = cmd_simulate(load(configs.at(0), ov), opt);
            print_summary(r.report);
            return r.exit_code;
        }
        if (*perturb) {
            const CommandResult r = cmd_perturb(load(configs.at(0), ov), opt);
            print_summary(r.report);
            return r.exit_code;
        }
        if (*distance) {
            const CommandResult r = cmd_distance(load(configs.at(0), ov), load(configs.at(1), ov), opt);
            print_summary(r.report);
            return r.exit_code;
        }
        if (*verify) {
            const auto rows = run_invariants(verify_seed, tolerance_scale);
            std::printf("%-40s %-12s %-12s %s\n", "invariant", "value", "tolerance", "status");
            const InvariantResult* first_fail = nullptr;
            for (const auto& row : rows) {
                std::printf("%-40s %-12.4g %-12.4g %s\n", row.id.c_str(), row.value, row.tolerance * tolerance_scale,
                            row.pass ? "PASS" : "FAIL");
                if (!row.pass && !first_fail)
                    first_fail = &row;
            }
            std::printf("%zu invariants, %s\n", rows.size(), first_fail ? "FAILED" : "all passed");
            if (first_fail) {
                std::fprintf(stderr, "first failing invariant: %s\n", first_fail->id.c_str());
                return exit_verify;
            }
            return exit_ok;
        }
    } catch (const PipelineError& e) {
        std::fprintf(stderr, "error [stage %s]: %s\n", e.stage().c_str(), e.what());
        return e.exit_code();
    } catch (const BudgetError& e) {
        std::fprintf(stderr, "budget error: %s (try r <= %.6g)\n", e.what(), e.suggested_r());
        return exit_config;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return exit_config;
    } catch (const DomainError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return exit_config;
    } catch (const Error& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return exit_numerical;
    }
    return exit_ok;
}

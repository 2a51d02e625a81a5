#ifndef KINETIC_APP_COMMANDS_HPP
#define KINETIC_APP_COMMANDS_HPP

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>

#include "kinetic/app/config.hpp"
#include "kinetic/app/report.hpp"
#include "kinetic/cocycle.hpp"
#include "kinetic/lpmetric.hpp"
#include "kinetic/perturb.hpp"

namespace kinetic::app {

enum ExitCode : int { exit_ok = 0, exit_verify = 1, exit_config = 2, exit_numerical = 3 };

struct CommandOptions
{
    bool timing = false;          ///< wall-clock in the report (breaks byte-identity across runs)
    bool write_files = true;
    std::size_t checkpoints = 100;
    std::size_t mc_samples = 100000;
};

struct CommandResult
{
    int exit_code = exit_ok;
    json report;
};

namespace detail {

inline json config_echo(const ExperimentConfig& c)
{
    json j = json::object();
    std::stringstream ss(serialize_config(c));
    std::string line;
    while (std::getline(ss, line)) {
        const auto eq = line.find(" = ");
        j[line.substr(0, eq)] = line.substr(eq + 3);
    }
    return j;
}

inline json header(const std::string& command, const ExperimentConfig& c)
{
    return json{{"command", command}, {"version", version}, {"seed", c.seed}, {"config", config_echo(c)}};
}

inline std::string csv_real(double x)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

class Stopwatch
{
public:
    double seconds() const
    {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline void prepare_out(const ExperimentConfig& c)
{
    std::error_code ec;
    std::filesystem::create_directories(c.out, ec);
    if (ec)
        throw ConfigError("field 'out': cannot create directory '" + c.out + "'");
}

} // namespace detail

inline constexpr const char* finite_time_header = "t,lambda1_ft,lambda2_ft,logdet_avg";

inline std::string finite_time_csv(const std::vector<FiniteTimeRow>& rows)
{
    std::string out = std::string(finite_time_header) + "\n";
    for (const auto& r : rows)
        out += detail::csv_real(r.t) + "," + detail::csv_real(r.lambda1_ft) + "," + detail::csv_real(r.lambda2_ft) + "," +
               detail::csv_real(r.logdet_avg) + "\n";
    return out;
}

/// Spectrum of the configured generator; report.json and finite_time.csv under cfg.out.
inline CommandResult cmd_simulate(const ExperimentConfig& cfg, const CommandOptions& opt = {})
{
    const detail::Stopwatch clock;
    const SuspensionFlow flow = make_flow(cfg);
    const GeneratorField gen = make_generator(cfg);
    const SpectrumOptions so{cfg.horizon, static_cast<std::size_t>(cfg.n_samples), cfg.step, cfg.seed, opt.checkpoints};
    const LyapunovReport rep = lyapunov_spectrum(flow, gen, so);

    CommandResult res;
    res.report = detail::header("simulate", cfg);
    res.report["spectrum"] = to_json(rep);
    res.report["simple"] = spectrum_is_simple(rep);
    if (opt.timing)
        res.report["wall_clock_s"] = clock.seconds();
    if (opt.write_files) {
        detail::prepare_out(cfg);
        write_text(cfg.out + "/report.json", dump_report(res.report));
        write_text(cfg.out + "/finite_time.csv", finite_time_csv(rep.finite_time));
    }
    return res;
}

namespace detail {

/// Q~ on the boxes of a Schrodinger output: E - theta*^2 on V_R, E + 1 on V_S.
inline json schrodinger_section(const SuspensionFlow& flow, const ExperimentConfig& cfg, const GeneratorField& input,
                                const GeneratorField& output, const PerturbationPlan& plan)
{
    std::shared_ptr<const TunedRotationRule> rule;
    for (const auto& o : output.overrides())
        if (o.box == plan.rotate_box)
            if (const auto* r = std::get_if<std::shared_ptr<const TunedRotationRule>>(&o.value))
                rule = *r;
    if (!rule)
        throw NumericalError("schrodinger section: output has no tuned rotation");
    const auto& beta = std::get<KineticBase>(input.base()).beta;

    const double on_r = flowbox_integral(flow, plan.rotate_box, [&](const SuspensionPoint& q) {
        const double th = rule->theta_at(q.base);
        return std::pow(std::abs(beta(q.base, q.height) - th * th), plan.p);
    });
    const double on_s = flowbox_integral(flow, plan.stretch_box, [&](const SuspensionPoint& q) {
        return std::pow(std::abs(beta(q.base, q.height) + 1.0), plan.p);
    });

    json table = json::array();
    constexpr int rows = 8;
    for (int i = 0; i < rows; ++i) {
        BasePoint w{plan.region.lo[0] + (plan.region.hi[0] - plan.region.lo[0]) * (i + 0.5) / rows, 0.0};
        if (plan.region.dimension == 2)
            w[1] = plan.region.lo[1] + (plan.region.hi[1] - plan.region.lo[1]) * 0.5;
        const double th = rule->theta_at(w);
        table.push_back(json{{"w1", real(w[0])},
                             {"w2", real(w[1])},
                             {"theta", real(th)},
                             {"Q_tilde_VR", real(cfg.energy - th * th)},
                             {"Q_tilde_VS", real(cfg.energy + 1.0)}});
    }
    const double dist = std::pow(on_r + on_s, 1.0 / plan.p);
    return json{{"potential_distance_Lp", real(dist)},
                {"potential_distance_bound", real(direct_distance_bound(flow, input, plan))},
                {"below_eps", dist < cfg.eps},
                {"note", "overrides change only the beta entry, i.e. the potential"},
                {"Q_tilde_samples", table}};
}

} // namespace detail

/// run_pipeline + splitting verification. Exit 1 unless the output spectrum is simple.
inline CommandResult cmd_perturb(const ExperimentConfig& cfg, const CommandOptions& opt = {})
{
    const detail::Stopwatch clock;
    const SuspensionFlow flow = make_flow(cfg);
    const GeneratorField gen = make_generator(cfg);
    PipelineOptions po;
    po.p = cfg.p;
    po.eps = cfg.eps;
    po.r = cfg.r;
    po.horizon = cfg.horizon;
    po.step = cfg.step;
    po.samples = static_cast<std::size_t>(cfg.n_samples);
    po.seed = cfg.seed;
    const PipelineResult out = run_pipeline(flow, gen, po);

    CommandResult res;
    res.report = detail::header("perturb", cfg);
    res.report["pipeline"] = to_json(out.report);
    if (cfg.generator == GeneratorPreset::schrodinger && !out.report.unchanged) {
        const PerturbationPlan plan = PerturbationPlan::make(flow, out.report.r, cfg.p, cfg.eps);
        res.report["schrodinger"] = detail::schrodinger_section(flow, cfg, gen, out.output, plan);
    }
    const bool ok = out.report.simple && (out.report.unchanged || out.report.splitting.pass());
    res.report["verdict"] = json{{"simple", out.report.simple}, {"pass", ok}};
    res.exit_code = ok ? exit_ok : exit_verify;
    if (opt.timing)
        res.report["wall_clock_s"] = clock.seconds();
    if (opt.write_files) {
        detail::prepare_out(cfg);
        write_text(cfg.out + "/report.json", dump_report(res.report));
        write_text(cfg.out + "/finite_time.csv", finite_time_csv(out.report.output_spectrum.finite_time));
    }
    return res;
}

/// sigma_p and sigma_hat_p between the generators of two configs on the same flow.
inline CommandResult cmd_distance(const ExperimentConfig& a, const ExperimentConfig& b, const CommandOptions& opt = {})
{
    if (!same_flow(a, b))
        throw ConfigError("distance: the two configs describe different base flows");
    const SuspensionFlow flow = make_flow(a);
    const LpConfig lp{a.p, opt.mc_samples, a.seed};
    const DistanceEstimate hat = sigma_hat_p(flow, make_generator(a), make_generator(b), lp);
    const DistanceEstimate sig = sigma_p(flow, make_generator(a), make_generator(b), lp);
    CommandResult res;
    res.report = json{{"command", "distance"},
                      {"version", version},
                      {"p", real(a.p)},
                      {"seed", a.seed},
                      {"sigma_hat", real(hat.value)},
                      {"sigma_hat_std_error", real(hat.std_error)},
                      {"sigma", real(sig.value)},
                      {"sigma_std_error", real(sig.std_error)},
                      {"exact", hat.exact}};
    return res;
}

} // namespace kinetic::app

#endif // KINETIC_APP_COMMANDS_HPP

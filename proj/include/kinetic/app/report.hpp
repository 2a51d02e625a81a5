#ifndef KINETIC_APP_REPORT_HPP
#define KINETIC_APP_REPORT_HPP

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "json.hpp"

#include "kinetic/cocycle.hpp"
#include "kinetic/error.hpp"
#include "kinetic/perturb.hpp"

namespace kinetic::app {

using json = nlohmann::json;

inline constexpr const char* version = "0.1.0";

/// Non-finite reals become the strings "inf", "-inf", "nan".
inline json real(double x)
{
    if (std::isnan(x))
        return "nan";
    if (std::isinf(x))
        return x > 0 ? "inf" : "-inf";
    return x;
}

namespace detail {

inline void dump_to(const json& j, std::string& out, int indent, int depth)
{
    const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
    const std::string close_pad(static_cast<std::size_t>(indent * depth), ' ');
    switch (j.type()) {
    case json::value_t::object: {
        if (j.empty()) {
            out += "{}";
            return;
        }
        out += "{\n";
        bool first = true;
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (!first)
                out += ",\n";
            first = false;
            out += pad + json(it.key()).dump() + ": ";
            dump_to(it.value(), out, indent, depth + 1);
        }
        out += "\n" + close_pad + "}";
        return;
    }
    case json::value_t::array: {
        if (j.empty()) {
            out += "[]";
            return;
        }
        out += "[\n";
        for (std::size_t i = 0; i < j.size(); ++i) {
            if (i)
                out += ",\n";
            out += pad;
            dump_to(j[i], out, indent, depth + 1);
        }
        out += "\n" + close_pad + "]";
        return;
    }
    case json::value_t::number_float: {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", j.get<double>());
        out += buf;
        return;
    }
    default:
        out += j.dump();
    }
}

} // namespace detail

/// Pretty JSON with every float printed to 17 significant digits.
inline std::string dump_report(const json& j)
{
    std::string out;
    detail::dump_to(j, out, 2, 0);
    out += "\n";
    return out;
}

inline void write_text(const std::string& path, const std::string& text)
{
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw ConfigError("cannot write '" + path + "'");
    f << text;
}

inline json to_json(const LyapunovReport& r)
{
    json per = json::array();
    for (double x : r.per_sample_lambda1)
        per.push_back(real(x));
    return json{{"lambda1", real(r.lambda1)},
                {"lambda2", real(r.lambda2)},
                {"sum_via_trace", real(r.sum_via_trace)},
                {"lambda1_frame", real(r.lambda1_frame)},
                {"lambda2_frame", real(r.lambda2_frame)},
                {"horizon", real(r.horizon)},
                {"samples", r.samples},
                {"std_error", real(r.std_error)},
                {"sum_std_error", real(r.sum_std_error)},
                {"frame_sum_residual", real(r.frame_sum_residual)},
                {"periodic_resamples", r.periodic_resamples},
                {"per_sample_lambda1", per}};
}

inline json to_json(const StageDistance& d)
{
    return json{{"sigma_hat", real(d.sigma_hat)}, {"sigma", real(d.sigma)}, {"exact", d.exact}};
}

inline json to_json(const SplittingVerdict& v)
{
    return json{{"lambda_B_g", real(v.lambda_B_g)},
                {"lambda_B0_g", real(v.lambda_B0_g)},
                {"difference", real(v.difference)},
                {"mu_VS", real(v.mu_stretch)},
                {"difference_residual", real(v.difference_residual)},
                {"trace_residual", real(v.trace_residual)},
                {"trace_avg", real(v.trace_avg)},
                {"mean_increment", real(v.mean_increment)},
                {"max_increment_error", real(v.max_increment_error)},
                {"visits", v.visits},
                {"visit_rate", real(v.visit_rate)},
                {"pass", v.pass()}};
}

inline json to_json(const PipelineReport& r)
{
    json j{{"r", real(r.r)},
           {"p", real(r.p)},
           {"eps", real(r.eps)},
           {"mu_VR", real(r.mu_rotate)},
           {"mu_VS", real(r.mu_stretch)},
           {"unchanged", r.unchanged},
           {"simple", r.simple}};
    if (r.input_spectrum)
        j["input_spectrum"] = to_json(*r.input_spectrum);
    if (!r.unchanged) {
        j["sigma_A_A0"] = to_json(r.a_a0);
        j["sigma_A0_B0"] = to_json(r.a0_b0);
        j["sigma_B0_B"] = to_json(r.b0_b);
        j["sigma_total"] = real(r.total.sigma);
        j["sigma_hat_total"] = real(r.total.sigma_hat);
        j["budget_ok"] = r.budget_ok;
        j["det_chain"] = json{{"B_vs_B0", real(r.det_chain.b_vs_b0)}, {"B0_vs_A0", real(r.det_chain.b0_vs_a0)}};
        j["splitting"] = to_json(r.splitting);
        j["lambda_B0"] = real(r.splitting.lambda_B0_g);
        j["predicted_lambda1"] = real(r.predicted_lambda1);
        j["certified_gap"] = real(r.certified_gap);
    }
    j["output_spectrum"] = to_json(r.output_spectrum);
    return j;
}

} // namespace kinetic::app

#endif // KINETIC_APP_REPORT_HPP

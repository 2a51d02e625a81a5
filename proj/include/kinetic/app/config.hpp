#ifndef KINETIC_APP_CONFIG_HPP
#define KINETIC_APP_CONFIG_HPP

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "kinetic/baseflow.hpp"
#include "kinetic/error.hpp"
#include "kinetic/generator.hpp"
#include "kinetic/mat2.hpp"

namespace kinetic::app {

enum class GeneratorPreset { damped, traceless, schrodinger };

/**
 * Flat key = value experiment description. Field expressions are four
 * comma-separated coefficients a0,a1,a2,a3 meaning
 * a0 + a1 cos(2 pi w1) + a2 sin(2 pi w1) + a3 cos(2 pi s / H0).
 */
struct ExperimentConfig
{
    std::string base = "rotation";        // rotation | cat
    double rotation = golden_rotation;
    std::string roof = "constant";        // constant | cosine
    double roof_h0 = 3.0;
    double roof_c = 0.0;
    GeneratorPreset generator = GeneratorPreset::damped;
    std::array<double, 4> alpha{};
    std::array<double, 4> beta{};
    std::array<double, 4> q{};
    double energy = 0.0;
    double p = 1.0;
    double eps = 0.1;
    double horizon = 1e5;
    double step = 1e-3;
    std::uint64_t n_samples = 4;
    std::uint64_t seed = 1;
    std::string out = "out";
    double r = 0.0;                       // 0: chosen from the eps budget
    // Optional constant kinetic override on phi^[a,b)(origin region of measure override_r).
    double override_r = 0.0;
    double override_a = 0.0;
    double override_b = 1.0;
    double override_alpha = 0.0;
    double override_beta = 0.0;

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

inline std::string preset_name(GeneratorPreset g)
{
    switch (g) {
    case GeneratorPreset::damped: return "damped";
    case GeneratorPreset::traceless: return "traceless";
    case GeneratorPreset::schrodinger: return "schrodinger";
    }
    return "damped";
}

namespace detail {

inline std::string trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

inline double parse_real(const std::string& key, const std::string& text)
{
    double value = 0.0;
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc() || ptr != end || std::isnan(value))
        throw ConfigError("field '" + key + "': expected a real number, got '" + text + "'");
    return value;
}

inline std::uint64_t parse_count(const std::string& key, const std::string& text)
{
    std::uint64_t value = 0;
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc() || ptr != end)
        throw ConfigError("field '" + key + "': expected a non-negative integer, got '" + text + "'");
    return value;
}

inline std::array<double, 4> parse_coeffs(const std::string& key, const std::string& text)
{
    std::array<double, 4> out{};
    std::size_t i = 0;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (i == 4)
            throw ConfigError("field '" + key + "': at most 4 coefficients");
        out[i++] = parse_real(key, trim(item));
    }
    if (i == 0)
        throw ConfigError("field '" + key + "': empty coefficient list");
    return out;
}

inline std::string format_real(double x)
{
    if (std::isinf(x))
        return x > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::string format_coeffs(const std::array<double, 4>& c)
{
    return format_real(c[0]) + "," + format_real(c[1]) + "," + format_real(c[2]) + "," + format_real(c[3]);
}

} // namespace detail

/// Range checks on every field; messages name the field.
inline void validate(const ExperimentConfig& c)
{
    auto fail = [](const std::string& key, const std::string& why) { throw ConfigError("field '" + key + "': " + why); };
    if (c.base != "rotation" && c.base != "cat")
        fail("base", "must be 'rotation' or 'cat'");
    if (c.base == "rotation" && !(c.rotation > 0.0 && c.rotation < 1.0))
        fail("rotation", "must lie in (0, 1)");
    if (c.roof != "constant" && c.roof != "cosine")
        fail("roof", "must be 'constant' or 'cosine'");
    if (!std::isfinite(c.roof_h0) || !std::isfinite(c.roof_c))
        fail("roof.H0", "must be finite");
    if (!(c.roof_h0 - std::abs(c.roof == "cosine" ? c.roof_c : 0.0) > 2.0))
        fail("roof.H0", "roof infimum H0 - |c| must exceed 2");
    if (!(c.p >= 1.0) || !std::isfinite(c.p))
        fail("p", "must be >= 1 and finite");
    if (!(c.eps > 0.0))
        fail("eps", "must be positive (inf disables the budget)");
    if (!(c.horizon > 0.0) || !std::isfinite(c.horizon))
        fail("T", "must be positive");
    if (!(c.step > 0.0 && c.step <= 1.0))
        fail("step", "must lie in (0, 1]");
    if (c.n_samples < 1)
        fail("n_samples", "must be >= 1");
    if (!(c.r >= 0.0 && c.r < 1.0))
        fail("r", "must lie in [0, 1); 0 selects r from the budget");
    for (double x : c.alpha)
        if (!std::isfinite(x))
            fail("alpha", "coefficients must be finite");
    for (double x : c.beta)
        if (!std::isfinite(x))
            fail("beta", "coefficients must be finite");
    for (double x : c.q)
        if (!std::isfinite(x))
            fail("Q", "coefficients must be finite");
    if (!std::isfinite(c.energy))
        fail("E", "must be finite");
    if (c.generator != GeneratorPreset::damped && c.alpha != std::array<double, 4>{})
        fail("alpha", "must be zero for the " + preset_name(c.generator) + " preset");
    if (c.out.empty())
        fail("out", "must not be empty");
    if (c.override_r != 0.0) {
        if (!(c.override_r > 0.0 && c.override_r < 1.0))
            fail("override.r", "must lie in (0, 1)");
        const double inf_h = c.roof_h0 - std::abs(c.roof == "cosine" ? c.roof_c : 0.0);
        if (!(c.override_a >= 0.0 && c.override_b > c.override_a && c.override_b < inf_h))
            fail("override.a", "need 0 <= override.a < override.b < roof infimum");
        if (!std::isfinite(c.override_alpha) || !std::isfinite(c.override_beta))
            fail("override.beta", "must be finite");
    }
}

/// Parse the key = value text; '#' starts a comment. Unknown keys are errors.
inline ExperimentConfig parse_config(const std::string& text)
{
    ExperimentConfig c;
    std::stringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        const std::string body = detail::trim(line);
        if (body.empty())
            continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = detail::trim(std::string_view(body).substr(0, eq));
        const std::string value = detail::trim(std::string_view(body).substr(eq + 1));
        using detail::parse_count;
        using detail::parse_real;
        if (key == "base") c.base = value;
        else if (key == "rotation") c.rotation = parse_real(key, value);
        else if (key == "roof") c.roof = value;
        else if (key == "roof.H0") c.roof_h0 = parse_real(key, value);
        else if (key == "roof.c") c.roof_c = parse_real(key, value);
        else if (key == "generator") {
            if (value == "damped") c.generator = GeneratorPreset::damped;
            else if (value == "traceless") c.generator = GeneratorPreset::traceless;
            else if (value == "schrodinger") c.generator = GeneratorPreset::schrodinger;
            else throw ConfigError("field 'generator': must be damped, traceless or schrodinger");
        }
        else if (key == "alpha") c.alpha = detail::parse_coeffs(key, value);
        else if (key == "beta") c.beta = detail::parse_coeffs(key, value);
        else if (key == "Q") c.q = detail::parse_coeffs(key, value);
        else if (key == "E") c.energy = parse_real(key, value);
        else if (key == "p") c.p = parse_real(key, value);
        else if (key == "eps") c.eps = parse_real(key, value);
        else if (key == "T") c.horizon = parse_real(key, value);
        else if (key == "step") c.step = parse_real(key, value);
        else if (key == "n_samples") c.n_samples = parse_count(key, value);
        else if (key == "seed") c.seed = parse_count(key, value);
        else if (key == "out") c.out = value;
        else if (key == "r") c.r = parse_real(key, value);
        else if (key == "override.r") c.override_r = parse_real(key, value);
        else if (key == "override.a") c.override_a = parse_real(key, value);
        else if (key == "override.b") c.override_b = parse_real(key, value);
        else if (key == "override.alpha") c.override_alpha = parse_real(key, value);
        else if (key == "override.beta") c.override_beta = parse_real(key, value);
        else throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    validate(c);
    return c;
}

inline ExperimentConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

/// Every field, reals with 17 significant digits.
inline std::string serialize_config(const ExperimentConfig& c)
{
    using detail::format_coeffs;
    using detail::format_real;
    std::ostringstream o;
    o << "base = " << c.base << "\n"
      << "rotation = " << format_real(c.rotation) << "\n"
      << "roof = " << c.roof << "\n"
      << "roof.H0 = " << format_real(c.roof_h0) << "\n"
      << "roof.c = " << format_real(c.roof_c) << "\n"
      << "generator = " << preset_name(c.generator) << "\n"
      << "alpha = " << format_coeffs(c.alpha) << "\n"
      << "beta = " << format_coeffs(c.beta) << "\n"
      << "Q = " << format_coeffs(c.q) << "\n"
      << "E = " << format_real(c.energy) << "\n"
      << "p = " << format_real(c.p) << "\n"
      << "eps = " << format_real(c.eps) << "\n"
      << "T = " << format_real(c.horizon) << "\n"
      << "step = " << format_real(c.step) << "\n"
      << "n_samples = " << c.n_samples << "\n"
      << "seed = " << c.seed << "\n"
      << "out = " << c.out << "\n"
      << "r = " << format_real(c.r) << "\n"
      << "override.r = " << format_real(c.override_r) << "\n"
      << "override.a = " << format_real(c.override_a) << "\n"
      << "override.b = " << format_real(c.override_b) << "\n"
      << "override.alpha = " << format_real(c.override_alpha) << "\n"
      << "override.beta = " << format_real(c.override_beta) << "\n";
    return o.str();
}

inline SuspensionFlow make_flow(const ExperimentConfig& c)
{
    validate(c);
    const BaseSystem base = c.base == "rotation" ? BaseSystem::circle_rotation(c.rotation) : BaseSystem::torus_cat_map();
    const RoofFunction roof =
        c.roof == "constant" ? RoofFunction::constant(c.roof_h0) : RoofFunction::cosine(c.roof_h0, c.roof_c);
    return SuspensionFlow(base, roof);
}

inline FieldExpr make_expr(const std::array<double, 4>& coeffs, double height_period)
{
    return FieldExpr{coeffs, height_period};
}

inline GeneratorField make_generator(const ExperimentConfig& c)
{
    validate(c);
    const double period = c.roof_h0;
    GeneratorField gen = c.generator == GeneratorPreset::damped
                             ? GeneratorField::kinetic(make_expr(c.alpha, period), make_expr(c.beta, period))
                         : c.generator == GeneratorPreset::traceless
                             ? GeneratorField::traceless(make_expr(c.beta, period))
                             : GeneratorField::schrodinger(make_expr(c.q, period), c.energy);
    if (c.override_r != 0.0) {
        const SuspensionFlow flow = make_flow(c);
        const FlowboxSpec box{origin_region(flow.base(), c.override_r), c.override_a, c.override_b};
        flow.validate(box);
        gen = gen.with_override(box, kinetic_matrix(c.override_alpha, c.override_beta));
    }
    return gen;
}

/// Same base system and roof: required to compare generators on one flow.
inline bool same_flow(const ExperimentConfig& a, const ExperimentConfig& b)
{
    return a.base == b.base && (a.base != "rotation" || a.rotation == b.rotation) && a.roof == b.roof &&
           a.roof_h0 == b.roof_h0 && (a.roof != "cosine" || a.roof_c == b.roof_c);
}

} // namespace kinetic::app

#endif // KINETIC_APP_CONFIG_HPP

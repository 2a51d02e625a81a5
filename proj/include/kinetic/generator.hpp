#ifndef KINETIC_GENERATOR_HPP
#define KINETIC_GENERATOR_HPP

#include <array>
#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <variant>
#include <vector>

#include "kinetic/baseflow.hpp"
#include "kinetic/error.hpp"
#include "kinetic/mat2.hpp"

namespace kinetic {

/// Scalar field c0 + c1 cos(2 pi w_1) + c2 sin(2 pi w_1) + c3 cos(2 pi s / period).
struct FieldExpr
{
    std::array<double, 4> c{};
    double height_period = 3.0;

    static FieldExpr constant(double value) { return FieldExpr{{value, 0.0, 0.0, 0.0}, 3.0}; }

    double base_part(const BasePoint& w) const
    {
        if (c[1] == 0.0 && c[2] == 0.0)
            return c[0];
        const double angle = two_pi * w[0];
        return c[0] + c[1] * std::cos(angle) + c[2] * std::sin(angle);
    }
    double height_part(double s) const
    {
        return c[3] == 0.0 ? 0.0 : c[3] * std::cos(two_pi * s / height_period);
    }
    double operator()(const BasePoint& w, double s) const { return base_part(w) + height_part(s); }

    bool is_constant() const { return c[1] == 0.0 && c[2] == 0.0 && c[3] == 0.0; }
    bool is_zero() const { return is_constant() && c[0] == 0.0; }
    bool height_free() const { return c[3] == 0.0; }
    double sup_abs() const { return std::abs(c[0]) + std::abs(c[1]) + std::abs(c[2]) + std::abs(c[3]); }

    friend bool operator==(const FieldExpr&, const FieldExpr&) = default;
};

/// Per-base-point rotation frequency for a tuned override (R_theta with theta
/// chosen from the fibre's entry point).
class TunedRotationRule
{
public:
    virtual ~TunedRotationRule() = default;
    virtual double theta_at(const BasePoint& entry) const = 0;
};

using OverrideValue = std::variant<Mat2, std::shared_ptr<const TunedRotationRule>>;

struct Override
{
    FlowboxSpec box;
    OverrideValue value;
};

enum class GeneratorClass { general, kinetic, traceless_kinetic };

/// Kinetic base (alpha, beta) in ((0, 1), (-beta, -alpha)).
struct KineticBase
{
    FieldExpr alpha;
    FieldExpr beta;
    friend bool operator==(const KineticBase&, const KineticBase&) = default;
};

/**
 * Measurable generator w -> A(w) on the suspension: a base description (kinetic
 * pair or a constant matrix) plus constant or tuned overrides on disjoint flowboxes.
 */
class GeneratorField
{
public:
    using Base = std::variant<KineticBase, Mat2>;

    GeneratorField(FieldExpr alpha, FieldExpr beta) : base_(KineticBase{alpha, beta}) {}
    explicit GeneratorField(const Mat2& constant) : base_(constant) {}

    static GeneratorField kinetic(FieldExpr alpha, FieldExpr beta) { return GeneratorField(alpha, beta); }
    static GeneratorField traceless(FieldExpr beta) { return GeneratorField(FieldExpr{}, beta); }
    /// Schrodinger cocycle at energy E: alpha = 0, beta = E - Q.
    static GeneratorField schrodinger(const FieldExpr& potential, double energy)
    {
        FieldExpr beta = potential;
        beta.c[0] = energy - potential.c[0];
        for (std::size_t i = 1; i < 4; ++i)
            beta.c[i] = -potential.c[i];
        return traceless(beta);
    }

    const Base& base() const { return base_; }
    const std::vector<Override>& overrides() const { return overrides_; }

    std::vector<FlowboxSpec> boxes() const
    {
        std::vector<FlowboxSpec> out;
        out.reserve(overrides_.size());
        for (const auto& o : overrides_)
            out.push_back(o.box);
        return out;
    }

    /// Copy with the override on `box` replaced, or added if none has that box.
    GeneratorField with_override(const FlowboxSpec& box, OverrideValue value) const
    {
        GeneratorField out = *this;
        for (auto& o : out.overrides_) {
            if (o.box == box) {
                o.value = std::move(value);
                return out;
            }
        }
        for (const auto& o : out.overrides_)
            if (o.box.overlaps(box))
                throw ConfigError("override boxes overlap");
        out.overrides_.push_back(Override{box, std::move(value)});
        return out;
    }

    GeneratorField without_overrides() const
    {
        GeneratorField out = *this;
        out.overrides_.clear();
        return out;
    }

    const Override* override_at(const SuspensionPoint& p) const
    {
        for (const auto& o : overrides_)
            if (o.box.contains(p))
                return &o;
        return nullptr;
    }

    Mat2 base_value(const BasePoint& w, double s) const
    {
        if (const auto* k = std::get_if<KineticBase>(&base_))
            return kinetic_matrix(k->alpha(w, s), k->beta(w, s));
        return std::get<Mat2>(base_);
    }

    static Mat2 override_value(const Override& o, const BasePoint& w)
    {
        if (const auto* m = std::get_if<Mat2>(&o.value))
            return *m;
        return rotation_generator(std::get<std::shared_ptr<const TunedRotationRule>>(o.value)->theta_at(w));
    }

    /// A(p): the override value inside an override box, the base value elsewhere.
    Mat2 evaluate(const SuspensionPoint& p) const
    {
        if (const Override* o = override_at(p))
            return override_value(*o, p.base);
        return base_value(p.base, p.height);
    }

    /// Base field constant in (w, s)?
    std::optional<Mat2> constant_base() const
    {
        if (const auto* m = std::get_if<Mat2>(&base_))
            return *m;
        const auto& k = std::get<KineticBase>(base_);
        if (k.alpha.is_constant() && k.beta.is_constant())
            return kinetic_matrix(k.alpha.c[0], k.beta.c[0]);
        return std::nullopt;
    }

    /// Uniform bound on ||A|| off the overrides.
    double base_sup_norm() const
    {
        if (const auto* m = std::get_if<Mat2>(&base_))
            return norm(*m);
        const auto& k = std::get<KineticBase>(base_);
        const double a = k.alpha.sup_abs();
        const double b = k.beta.sup_abs();
        return std::sqrt(1.0 + a * a + b * b);
    }

    GeneratorClass classify() const
    {
        bool kinetic_all = true;
        bool traceless_all = true;
        if (const auto* m = std::get_if<Mat2>(&base_)) {
            kinetic_all = is_kinetic(*m);
            traceless_all = kinetic_all && m->a22 == 0.0;
        } else {
            traceless_all = std::get<KineticBase>(base_).alpha.is_zero();
        }
        for (const auto& o : overrides_) {
            if (const auto* m = std::get_if<Mat2>(&o.value)) {
                kinetic_all = kinetic_all && is_kinetic(*m);
                traceless_all = traceless_all && is_kinetic(*m) && m->a22 == 0.0;
            }
        }
        if (!kinetic_all)
            return GeneratorClass::general;
        return traceless_all ? GeneratorClass::traceless_kinetic : GeneratorClass::kinetic;
    }

private:
    Base base_;
    std::vector<Override> overrides_;
};

} // namespace kinetic

#endif // KINETIC_GENERATOR_HPP

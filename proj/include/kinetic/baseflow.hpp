#ifndef KINETIC_BASEFLOW_HPP
#define KINETIC_BASEFLOW_HPP

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "kinetic/error.hpp"
#include "kinetic/mat2.hpp"
#include "kinetic/quadrature.hpp"
#include "kinetic/random.hpp"

namespace kinetic {

/// Point of the base Sigma: circle uses [0], torus uses [0] and [1].
using BasePoint = std::array<double, 2>;

inline constexpr double golden_rotation = 0.6180339887498949; // (sqrt(5) - 1) / 2

/// x mod 1 in [0, 1).
inline double wrap_unit(double x)
{
    double y = x - std::floor(x);
    if (y >= 1.0)
        y = 0.0;
    return y;
}

/// Distance on the circle R/Z.
inline double circle_distance(double a, double b)
{
    const double d = wrap_unit(a - b);
    return std::min(d, 1.0 - d);
}

enum class BaseKind { circle_rotation, torus_cat_map };

/// Invertible ergodic base map with a uniform invariant measure.
class BaseSystem
{
public:
    static BaseSystem circle_rotation(double rotation_number = golden_rotation)
    {
        if (!(rotation_number > 0.0 && rotation_number < 1.0))
            throw DomainError("circle rotation number must lie in (0, 1)");
        return BaseSystem(BaseKind::circle_rotation, rotation_number);
    }
    static BaseSystem torus_cat_map() { return BaseSystem(BaseKind::torus_cat_map, 0.0); }

    BaseKind kind() const { return kind_; }
    int dimension() const { return kind_ == BaseKind::circle_rotation ? 1 : 2; }
    double rotation_number() const { return rotation_; }

    BasePoint forward(const BasePoint& w) const
    {
        if (kind_ == BaseKind::circle_rotation)
            return {wrap_unit(w[0] + rotation_), 0.0};
        return {wrap_unit(2.0 * w[0] + w[1]), wrap_unit(w[0] + w[1])};
    }

    BasePoint inverse(const BasePoint& w) const
    {
        if (kind_ == BaseKind::circle_rotation)
            return {wrap_unit(w[0] - rotation_), 0.0};
        return {wrap_unit(w[0] - w[1]), wrap_unit(2.0 * w[1] - w[0])};
    }

    BasePoint sample(Rng& rng) const
    {
        if (kind_ == BaseKind::circle_rotation)
            return {rng.uniform(), 0.0};
        const double x = rng.uniform();
        return {x, rng.uniform()};
    }

    bool contains(const BasePoint& w) const
    {
        const bool first = w[0] >= 0.0 && w[0] < 1.0;
        return dimension() == 1 ? first && w[1] == 0.0 : first && w[1] >= 0.0 && w[1] < 1.0;
    }

    /// Mod-1 distance between base points.
    double distance(const BasePoint& a, const BasePoint& b) const
    {
        const double d0 = circle_distance(a[0], b[0]);
        return dimension() == 1 ? d0 : std::max(d0, circle_distance(a[1], b[1]));
    }

    friend bool operator==(const BaseSystem&, const BaseSystem&) = default;

private:
    BaseSystem(BaseKind kind, double rotation) : kind_(kind), rotation_(rotation) {}

    BaseKind kind_;
    double rotation_;
};

enum class RoofKind { constant, cosine };

/// Roof h(w) = H0 (+ c cos(2 pi w_1)); the infimum must exceed 2.
class RoofFunction
{
public:
    static RoofFunction constant(double height) { return RoofFunction(RoofKind::constant, height, 0.0); }
    static RoofFunction cosine(double mean_height, double amplitude)
    {
        return RoofFunction(RoofKind::cosine, mean_height, amplitude);
    }

    RoofKind kind() const { return kind_; }
    double mean_height() const { return mean_; }
    double amplitude() const { return amplitude_; }

    double operator()(const BasePoint& w) const
    {
        if (kind_ == RoofKind::constant)
            return mean_;
        return mean_ + amplitude_ * std::cos(two_pi * w[0]);
    }

    double infimum() const { return mean_ - std::abs(amplitude_); }
    double supremum() const { return mean_ + std::abs(amplitude_); }
    /// Integral against the uniform base measure (the cosine term integrates to zero).
    double integral() const { return mean_; }

    friend bool operator==(const RoofFunction&, const RoofFunction&) = default;

private:
    RoofFunction(RoofKind kind, double mean, double amplitude) : kind_(kind), mean_(mean), amplitude_(amplitude)
    {
        if (!std::isfinite(mean) || !std::isfinite(amplitude))
            throw DomainError("roof parameters must be finite");
        if (!(mean - std::abs(amplitude) > 2.0))
            throw DomainError("roof infimum must exceed 2 (got H0 - |c| = " +
                              std::to_string(mean - std::abs(amplitude)) + ")");
    }

    RoofKind kind_;
    double mean_;
    double amplitude_;
};

/// Point (w, s) of the suspension with 0 <= s < h(w).
struct SuspensionPoint
{
    BasePoint base{};
    double height = 0.0;

    friend bool operator==(const SuspensionPoint&, const SuspensionPoint&) = default;
};

/// Axis-aligned rectangle of the base (an arc on the circle).
struct BaseRegion
{
    int dimension = 1;
    BasePoint lo{0.0, 0.0};
    BasePoint hi{0.0, 0.0};

    bool contains(const BasePoint& w) const
    {
        if (!(w[0] >= lo[0] && w[0] < hi[0]))
            return false;
        return dimension == 1 || (w[1] >= lo[1] && w[1] < hi[1]);
    }

    double measure() const
    {
        const double first = hi[0] - lo[0];
        return dimension == 1 ? first : first * (hi[1] - lo[1]);
    }

    bool intersects(const BaseRegion& o) const
    {
        const bool first = lo[0] < o.hi[0] && o.lo[0] < hi[0];
        return dimension == 1 ? first : first && lo[1] < o.hi[1] && o.lo[1] < hi[1];
    }

    friend bool operator==(const BaseRegion&, const BaseRegion&) = default;
};

/// Region of base measure r anchored at the origin: [0, r) or [0, sqrt r)^2.
inline BaseRegion origin_region(const BaseSystem& base, double r)
{
    if (!(r >= 0.0 && r <= 1.0))
        throw DomainError("origin_region: measure must lie in [0, 1]");
    if (base.dimension() == 1)
        return BaseRegion{1, {0.0, 0.0}, {r, 0.0}};
    const double side = std::sqrt(r);
    return BaseRegion{2, {0.0, 0.0}, {side, side}};
}

inline BaseRegion whole_base(const BaseSystem& base)
{
    return base.dimension() == 1 ? BaseRegion{1, {0.0, 0.0}, {1.0, 0.0}} : BaseRegion{2, {0.0, 0.0}, {1.0, 1.0}};
}

/// The flowbox phi^[a,b](B): points over B with heights in [a, b).
struct FlowboxSpec
{
    BaseRegion region;
    double a = 0.0;
    double b = 1.0;

    bool contains(const SuspensionPoint& p) const
    {
        return p.height >= a && p.height < b && region.contains(p.base);
    }

    bool overlaps(const FlowboxSpec& o) const { return a < o.b && o.a < b && region.intersects(o.region); }

    friend bool operator==(const FlowboxSpec&, const FlowboxSpec&) = default;
};

/// Special flow (phi^t, Sigma, T, h) with invariant measure mu = (mu~ x Leb) / int h.
class SuspensionFlow
{
public:
    SuspensionFlow(BaseSystem base, RoofFunction roof) : base_(base), roof_(roof) {}

    const BaseSystem& base() const { return base_; }
    const RoofFunction& roof() const { return roof_; }
    double roof_at(const BasePoint& w) const { return roof_(w); }
    /// int h dmu~.
    double mass() const { return roof_.integral(); }
    /// H, the uniform lower bound of the roof.
    double min_height() const { return roof_.infimum(); }

    void validate(const FlowboxSpec& box) const
    {
        if (box.region.dimension != base_.dimension())
            throw ConfigError("flowbox region dimension does not match the base");
        if (!(box.a >= 0.0 && box.b > box.a))
            throw ConfigError("flowbox needs 0 <= a < b");
        if (!(box.b < min_height()))
            throw ConfigError("flowbox top b must stay below the roof infimum H");
        const double m = box.region.measure();
        if (!(m >= 0.0 && m <= 1.0))
            throw ConfigError("flowbox base measure must lie in [0, 1]");
    }

    /// Resolve heights outside [0, h(w)) through the identification (w, h(w)) ~ (Tw, 0).
    SuspensionPoint normalize(SuspensionPoint p) const
    {
        double h = roof_(p.base);
        while (p.height >= h) {
            p.height -= h;
            p.base = base_.forward(p.base);
            h = roof_(p.base);
        }
        while (p.height < 0.0) {
            p.base = base_.inverse(p.base);
            p.height += roof_(p.base);
        }
        // p.height + h can round up to exactly h.
        if (p.height >= roof_(p.base)) {
            p.height = 0.0;
            p.base = base_.forward(p.base);
        }
        return p;
    }

    /// phi^t(p) for any real t.
    SuspensionPoint flow(const SuspensionPoint& p, double t) const
    {
        return normalize(SuspensionPoint{p.base, p.height + t});
    }

private:
    BaseSystem base_;
    RoofFunction roof_;
};

/// mu(phi^[a,b](B)) = (b - a) mu~(B) / int h.
inline double measure_of_flowbox(const SuspensionFlow& flow, const FlowboxSpec& box)
{
    return (box.b - box.a) * box.region.measure() / flow.mass();
}

/// Maximal orbit interval during which the generator's description does not change:
/// one base point, heights [h0, h1), and at most one flowbox.
struct OrbitPiece
{
    BasePoint base;
    double h0;
    double h1;
    double t0;   ///< orbit time at height h0, relative to the walk start
    int box;     ///< index into the walked box list, -1 if none

    double length() const { return h1 - h0; }
};

/**
 * Walk phi^t(p), 0 <= t <= duration, as consecutive OrbitPieces, split at every
 * roof crossing and at the height boundaries of every box over the current base
 * point. Boxes must be pairwise disjoint. `fn` may return bool; false stops the walk.
 */
template <class Fn>
void walk_orbit(const SuspensionFlow& flow, const SuspensionPoint& start, double duration,
                std::span<const FlowboxSpec> boxes, Fn&& fn)
{
    const SuspensionPoint p = flow.normalize(start);
    BasePoint w = p.base;
    double s = p.height;
    CompensatedSum base_time;  // orbit time at which the orbit sits at height 0 of w
    base_time += -s;
    std::vector<int> here;
    here.reserve(4);

    while (true) {
        const double h = flow.roof_at(w);
        const double t_base = base_time.value();
        const double stop = std::min(h, duration - t_base);

        here.clear();
        for (std::size_t i = 0; i < boxes.size(); ++i)
            if (boxes[i].region.contains(w))
                here.push_back(static_cast<int>(i));

        while (s < stop) {
            double next = stop;
            int box = -1;
            for (int i : here) {
                const FlowboxSpec& bx = boxes[static_cast<std::size_t>(i)];
                if (s >= bx.a && s < bx.b) {
                    box = i;
                    next = std::min(next, bx.b);
                } else if (bx.a > s) {
                    next = std::min(next, bx.a);
                }
            }
            const OrbitPiece piece{w, s, next, t_base + s, box};
            if constexpr (std::is_same_v<std::invoke_result_t<Fn&, const OrbitPiece&>, bool>) {
                if (!fn(piece))
                    return;
            } else {
                fn(piece);
            }
            s = next;
        }
        if (stop < h)
            return;
        base_time += h;
        w = flow.base().forward(w);
        s = 0.0;
    }
}

/// One passage through a box.
struct CrossingEvent
{
    int box;
    double entry;
    double exit;
    bool clipped;  ///< started inside the box or cut by the horizon

    double duration() const { return exit - entry; }
};

/// Passages of phi^t(p), 0 <= t <= t_max, through the given boxes, in time order.
inline std::vector<CrossingEvent> itinerary(const SuspensionFlow& flow, const SuspensionPoint& p, double t_max,
                                            std::span<const FlowboxSpec> boxes)
{
    if (!(t_max > 0.0))
        throw DomainError("itinerary: horizon must be positive");
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        flow.validate(boxes[i]);
        for (std::size_t j = 0; j < i; ++j)
            if (boxes[i].overlaps(boxes[j]))
                throw ConfigError("itinerary: boxes overlap");
    }
    std::vector<CrossingEvent> events;
    walk_orbit(flow, p, t_max, boxes, [&](const OrbitPiece& piece) {
        if (piece.box < 0)
            return;
        const FlowboxSpec& bx = boxes[static_cast<std::size_t>(piece.box)];
        const bool clipped = piece.h0 != bx.a || piece.h1 != bx.b;
        events.push_back(CrossingEvent{piece.box, piece.t0, piece.t0 + piece.length(), clipped});
    });
    return events;
}

/// Draw from mu~ reweighted by h (rejection against sup h).
inline BasePoint sample_base_weighted(const SuspensionFlow& flow, Rng& rng)
{
    const double top = flow.roof().supremum();
    while (true) {
        const BasePoint w = flow.base().sample(rng);
        if (flow.roof().kind() == RoofKind::constant || rng.uniform() * top < flow.roof_at(w))
            return w;
    }
}

inline SuspensionPoint sample_mu_point(const SuspensionFlow& flow, Rng& rng)
{
    const BasePoint w = sample_base_weighted(flow, rng);
    return SuspensionPoint{w, rng.uniform() * flow.roof_at(w)};
}

/// n i.i.d. draws from the invariant measure mu; deterministic in the seed.
inline std::vector<SuspensionPoint> sample_mu(const SuspensionFlow& flow, std::size_t n, std::uint64_t seed)
{
    if (n < 1)
        throw DomainError("sample_mu: need at least one sample");
    Rng rng(seed);
    std::vector<SuspensionPoint> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        out.push_back(sample_mu_point(flow, rng));
    return out;
}

/// True when the base orbit of w returns exactly to w within max_steps iterations.
inline bool is_periodic_within(const BaseSystem& base, const BasePoint& w, std::size_t max_steps)
{
    BasePoint x = w;
    for (std::size_t i = 0; i < max_steps; ++i) {
        x = base.forward(x);
        if (x == w)
            return true;
    }
    return false;
}

/// (1/T) * time the orbit of p spends in the box over [0, T].
inline double time_average_in_box(const SuspensionFlow& flow, const SuspensionPoint& p, double horizon,
                                  const FlowboxSpec& box)
{
    const std::array<FlowboxSpec, 1> boxes{box};
    CompensatedSum inside;
    walk_orbit(flow, p, horizon, boxes, [&](const OrbitPiece& piece) {
        if (piece.box == 0)
            inside += piece.length();
    });
    return inside.value() / horizon;
}

} // namespace kinetic

#endif // KINETIC_BASEFLOW_HPP

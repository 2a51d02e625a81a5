#ifndef KINETIC_QUADRATURE_HPP
#define KINETIC_QUADRATURE_HPP

#include <array>
#include <cmath>
#include <cstddef>

namespace kinetic {

namespace detail {

// 8-point Gauss-Legendre rule on [-1, 1].
inline constexpr std::array<double, 8> gl8_nodes{
    -0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
    0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
inline constexpr std::array<double, 8> gl8_weights{
    0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
    0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};

} // namespace detail

/// Composite 8-point Gauss-Legendre integral of f over [a, b] with `panels` panels.
template <class F>
double gauss_legendre(F&& f, double a, double b, std::size_t panels = 1)
{
    if (!(b > a))
        return 0.0;
    const double width = (b - a) / static_cast<double>(panels);
    double total = 0.0;
    for (std::size_t k = 0; k < panels; ++k) {
        const double lo = a + width * static_cast<double>(k);
        const double mid = lo + 0.5 * width;
        double sum = 0.0;
        for (std::size_t i = 0; i < 8; ++i)
            sum += detail::gl8_weights[i] * f(mid + 0.5 * width * detail::gl8_nodes[i]);
        total += 0.5 * width * sum;
    }
    return total;
}

/// Neumaier-compensated running sum.
class CompensatedSum
{
public:
    CompensatedSum& operator+=(double x)
    {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
        return *this;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

} // namespace kinetic

#endif // KINETIC_QUADRATURE_HPP

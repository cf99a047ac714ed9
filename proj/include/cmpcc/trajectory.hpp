#pragma once

#include "cmpcc/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

namespace cmpcc
{

    using Vec3 = Eigen::Vector3d;

    // One polynomial piece of the global reference. Coefficients are in
    // ascending power and act on local time in [0, duration].
    struct PolySegment
    {
        double duration = 0.0;
        std::array<std::vector<double>, 3> coeffs;
        int corridor_index = 0;

        int degree() const { return static_cast<int>(coeffs[0].size()) - 1; }
    };

    // Horner evaluation of the order-th derivative of an ascending-power polynomial.
    inline double horner(const std::vector<double> &c, double s, int order)
    {
        const int n = static_cast<int>(c.size());
        if (order >= n)
        {
            return 0.0;
        }
        double acc = 0.0;
        for (int i = n - 1; i >= order; --i)
        {
            double factor = 1.0;
            for (int k = 0; k < order; ++k)
            {
                factor *= static_cast<double>(i - k);
            }
            acc = acc * s + factor * c[i];
        }
        return acc;
    }

    struct JointGap
    {
        int joint = 0; // between segment joint and joint + 1
        double position = 0.0;
        double velocity = 0.0;
        double acceleration = 0.0;
    };

    // Piecewise-polynomial global trajectory p(t) on [t0, tm].
    // Immutable after construction.
    class ReferenceTrajectory
    {
    public:
        static constexpr double kPositionJointTol = 1e-6;
        static constexpr double kDerivativeJointTol = 1e-4;

        enum class Validation
        {
            Full,
            StructuralOnly
        };

        ReferenceTrajectory() = default;

        ReferenceTrajectory(double t0, std::vector<PolySegment> segments,
                            Validation validation = Validation::Full)
            : t0_(t0), segments_(std::move(segments))
        {
            check_structure();
            starts_.reserve(segments_.size());
            double t = t0_;
            for (const auto &seg : segments_)
            {
                starts_.push_back(t);
                t += seg.duration;
            }
            tm_ = t;
            if (validation == Validation::Full)
            {
                for (const auto &gap : joint_gaps())
                {
                    if (gap.position > kPositionJointTol || gap.velocity > kDerivativeJointTol ||
                        gap.acceleration > kDerivativeJointTol)
                    {
                        std::ostringstream os;
                        os << "segment " << gap.joint + 1 << ": discontinuous joint with segment "
                           << gap.joint << " (position gap " << gap.position << ", velocity gap "
                           << gap.velocity << ", acceleration gap " << gap.acceleration << ")";
                        throw InputError(os.str());
                    }
                }
            }
        }

        double t0() const { return t0_; }
        double tm() const { return tm_; }
        double duration() const { return tm_ - t0_; }
        const std::vector<PolySegment> &segments() const { return segments_; }

        double clamp(double t) const { return std::clamp(t, t0_, tm_); }

        // Index of the segment containing clamped t; joints belong to the later segment.
        std::size_t segment_at(double t) const
        {
            t = clamp(t);
            auto it = std::upper_bound(starts_.begin(), starts_.end(), t);
            std::size_t idx = static_cast<std::size_t>(std::distance(starts_.begin(), it));
            return idx == 0 ? 0 : idx - 1;
        }

        int corridor_index_at(double t) const { return segments_[segment_at(t)].corridor_index; }

        // Position (order 0) or derivatives (orders 1, 2). Outside [t0, tm] the
        // trajectory holds its endpoint and all derivatives vanish.
        Vec3 eval(double t, int order) const
        {
            if (order < 0 || order > 2)
            {
                throw std::invalid_argument("trajectory eval: order must be 0, 1 or 2");
            }
            if (order > 0 && (t > tm_ || t < t0_))
            {
                return Vec3::Zero();
            }
            const std::size_t i = segment_at(t);
            const auto &seg = segments_[i];
            const double s = std::clamp(clamp(t) - starts_[i], 0.0, seg.duration);
            return Vec3(horner(seg.coeffs[0], s, order),
                        horner(seg.coeffs[1], s, order),
                        horner(seg.coeffs[2], s, order));
        }

        Vec3 position(double t) const { return eval(t, 0); }
        Vec3 velocity(double t) const { return eval(t, 1); }

        // Closest reference time to point within [t_guess - window, t_guess + window].
        // Dense sampling followed by ternary refinement around the best sample.
        double project(const Vec3 &point, double t_guess, double window) const
        {
            if (!(window > 0.0))
            {
                throw std::invalid_argument("trajectory project: window must be positive");
            }
            const double lo = clamp(t_guess - window);
            const double hi = clamp(t_guess + window);
            if (hi <= lo)
            {
                return lo;
            }
            const int samples = std::clamp(static_cast<int>(std::ceil((hi - lo) / 1e-3)), 2000, 20000);
            const double h = (hi - lo) / samples;
            auto dist2 = [&](double t)
            { return (position(t) - point).squaredNorm(); };

            double best_t = lo;
            double best_d = dist2(lo);
            for (int i = 1; i <= samples; ++i)
            {
                const double t = (i == samples) ? hi : lo + h * i;
                const double d = dist2(t);
                if (d < best_d)
                {
                    best_d = d;
                    best_t = t;
                }
            }

            double a = std::max(lo, best_t - h);
            double b = std::min(hi, best_t + h);
            for (int it = 0; it < 100 && b - a > 1e-12; ++it)
            {
                const double m1 = a + (b - a) / 3.0;
                const double m2 = b - (b - a) / 3.0;
                if (dist2(m1) < dist2(m2))
                {
                    b = m2;
                }
                else
                {
                    a = m1;
                }
            }
            const double refined = 0.5 * (a + b);
            return dist2(refined) < best_d ? refined : best_t;
        }

        // Gap magnitudes at every joint (position, first and second derivative).
        std::vector<JointGap> joint_gaps() const
        {
            std::vector<JointGap> gaps;
            for (std::size_t i = 0; i + 1 < segments_.size(); ++i)
            {
                const auto &a = segments_[i];
                const auto &b = segments_[i + 1];
                JointGap g;
                g.joint = static_cast<int>(i);
                double gp = 0.0, gv = 0.0, ga = 0.0;
                for (int ax = 0; ax < 3; ++ax)
                {
                    gp += std::pow(horner(a.coeffs[ax], a.duration, 0) - horner(b.coeffs[ax], 0.0, 0), 2);
                    gv += std::pow(horner(a.coeffs[ax], a.duration, 1) - horner(b.coeffs[ax], 0.0, 1), 2);
                    ga += std::pow(horner(a.coeffs[ax], a.duration, 2) - horner(b.coeffs[ax], 0.0, 2), 2);
                }
                g.position = std::sqrt(gp);
                g.velocity = std::sqrt(gv);
                g.acceleration = std::sqrt(ga);
                gaps.push_back(g);
            }
            return gaps;
        }

    private:
        void check_structure() const
        {
            if (segments_.empty())
            {
                throw InputError("trajectory has no segments");
            }
            for (std::size_t i = 0; i < segments_.size(); ++i)
            {
                const auto &seg = segments_[i];
                if (!(seg.duration > 0.0) || !std::isfinite(seg.duration))
                {
                    throw InputError("segment " + std::to_string(i) + ": duration must be positive");
                }
                const std::size_t n = seg.coeffs[0].size();
                if (n == 0 || seg.coeffs[1].size() != n || seg.coeffs[2].size() != n)
                {
                    throw InputError("segment " + std::to_string(i) +
                                     ": all axes need the same non-empty coefficient list");
                }
                for (const auto &axis : seg.coeffs)
                {
                    for (double c : axis)
                    {
                        if (!std::isfinite(c))
                        {
                            throw InputError("segment " + std::to_string(i) + ": non-finite coefficient");
                        }
                    }
                }
                if (seg.corridor_index < 0)
                {
                    throw InputError("segment " + std::to_string(i) + ": negative corridor_index");
                }
            }
        }

        double t0_ = 0.0;
        double tm_ = 0.0;
        std::vector<PolySegment> segments_;
        std::vector<double> starts_;
    };

} // namespace cmpcc

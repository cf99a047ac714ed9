#pragma once

#include "cmpcc/corridor.hpp"
#include "cmpcc/trajectory.hpp"

#include <vector>

namespace testing_support
{

    inline cmpcc::Polyhedron box(const cmpcc::Vec3 &lo, const cmpcc::Vec3 &hi)
    {
        std::vector<cmpcc::Halfspace> faces;
        for (int ax = 0; ax < 3; ++ax)
        {
            cmpcc::Vec3 n = cmpcc::Vec3::Zero();
            n(ax) = 1.0;
            faces.push_back({n, hi(ax)});
            faces.push_back({-n, -lo(ax)});
        }
        return cmpcc::Polyhedron(faces);
    }

    // Constant-velocity line p(t) = start + velocity (t - t0).
    inline cmpcc::ReferenceTrajectory straight_line(const cmpcc::Vec3 &start, const cmpcc::Vec3 &velocity,
                                                    double duration, double t0 = 0.0)
    {
        cmpcc::PolySegment seg;
        seg.duration = duration;
        for (int ax = 0; ax < 3; ++ax)
        {
            seg.coeffs[ax] = {start(ax), velocity(ax)};
        }
        return cmpcc::ReferenceTrajectory(t0, {seg});
    }

    // Rest-to-rest quintic from a to b.
    inline cmpcc::ReferenceTrajectory rest_to_rest(const cmpcc::Vec3 &a, const cmpcc::Vec3 &b, double T)
    {
        cmpcc::PolySegment seg;
        seg.duration = T;
        for (int ax = 0; ax < 3; ++ax)
        {
            const double d = b(ax) - a(ax);
            seg.coeffs[ax] = {a(ax), 0.0, 0.0, 10.0 * d / (T * T * T), -15.0 * d / (T * T * T * T),
                              6.0 * d / (T * T * T * T * T)};
        }
        return cmpcc::ReferenceTrajectory(0.0, {seg});
    }

    // Single box around the x axis, from x_lo to x_hi, half-width w in y and z.
    inline cmpcc::Corridor x_channel(double x_lo, double x_hi, double w, double z = 1.0)
    {
        return cmpcc::Corridor({box({x_lo, -w, z - w}, {x_hi, w, z + w})});
    }

} // namespace testing_support

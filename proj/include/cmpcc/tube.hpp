#pragma once

#include "cmpcc/corridor.hpp"
#include "cmpcc/error.hpp"
#include "cmpcc/trajectory.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

namespace cmpcc
{

    using Vec2 = Eigen::Vector2d;

    // Convex polygon cut from a polyhedron by the plane through plane_point
    // with normal axis. Vertices are CCW in the (e1, e2) basis, e1 x e2 = axis.
    struct CrossSection
    {
        Vec3 plane_point = Vec3::Zero();
        Vec3 axis = Vec3::UnitX();
        Vec3 e1 = Vec3::UnitY();
        Vec3 e2 = Vec3::UnitZ();
        std::vector<Vec2> vertices2d;

        Vec3 lift(const Vec2 &uv) const { return plane_point + uv.x() * e1 + uv.y() * e2; }
        Vec2 to_plane(const Vec3 &q) const
        {
            const Vec3 d = q - plane_point;
            return {d.dot(e1), d.dot(e2)};
        }
    };

    struct TubeRow
    {
        Vec3 normal = Vec3::Zero();
        double offset = 0.0;
    };

    // Per-step safety rows C^(k) q <= b^(k). When fallback is set the rows are
    // the raw polyhedron faces rather than a swept section.
    struct TubeConstraints
    {
        std::vector<TubeRow> rows;
        Vec3 axis = Vec3::Zero();
        Vec3 plane_point = Vec3::Zero();
        bool fallback = false;
        int polyhedron = -1;

        // Smallest slack over all rows, in distance units (negative when violated).
        double margin(const Vec3 &q) const
        {
            double m = std::numeric_limits<double>::infinity();
            for (const auto &r : rows)
            {
                m = std::min(m, (r.offset - r.normal.dot(q)) / r.normal.norm());
            }
            return m;
        }
    };

    // Orthonormal (e1, e2) spanning the plane normal to axis, with e1 x e2 = axis.
    inline std::pair<Vec3, Vec3> plane_basis(const Vec3 &axis)
    {
        Eigen::Index least = 0;
        axis.cwiseAbs().minCoeff(&least);
        const Vec3 e1 = axis.cross(Vec3::Unit(least)).normalized();
        const Vec3 e2 = axis.cross(e1);
        return {e1, e2};
    }

    namespace detail
    {

        struct Halfplane
        {
            Vec2 normal;
            double offset;
        };

        inline bool satisfies_all(const std::vector<Halfplane> &hp, const Vec2 &p, double tol)
        {
            return std::all_of(hp.begin(), hp.end(), [&](const Halfplane &h)
                               { return h.normal.dot(p) <= h.offset + tol; });
        }

        // Ordered vertices of a bounded intersection of unit-normal halfplanes.
        inline std::vector<Vec2> halfplane_polygon(const std::vector<Halfplane> &hp)
        {
            std::vector<Vec2> pts;
            for (std::size_t i = 0; i < hp.size(); ++i)
            {
                for (std::size_t j = i + 1; j < hp.size(); ++j)
                {
                    Eigen::Matrix2d M;
                    M.row(0) = hp[i].normal;
                    M.row(1) = hp[j].normal;
                    if (std::abs(M.determinant()) < 1e-12)
                    {
                        continue;
                    }
                    const Vec2 p = M.partialPivLu().solve(Vec2(hp[i].offset, hp[j].offset));
                    if (!p.allFinite() || !satisfies_all(hp, p, 1e-9))
                    {
                        continue;
                    }
                    if (std::none_of(pts.begin(), pts.end(), [&](const Vec2 &q)
                                     { return (q - p).norm() < 1e-9; }))
                    {
                        pts.push_back(p);
                    }
                }
            }
            if (pts.size() < 3)
            {
                return {};
            }

            Vec2 centroid = Vec2::Zero();
            for (const auto &p : pts)
            {
                centroid += p;
            }
            centroid /= static_cast<double>(pts.size());
            std::sort(pts.begin(), pts.end(), [&](const Vec2 &a, const Vec2 &b)
                      {
                          const double ta = std::atan2(a.y() - centroid.y(), a.x() - centroid.x());
                          const double tb = std::atan2(b.y() - centroid.y(), b.x() - centroid.x());
                          if (ta != tb)
                          {
                              return ta < tb;
                          }
                          return (a - centroid).squaredNorm() < (b - centroid).squaredNorm(); });

            // Drop points lying on the segment between their neighbours.
            bool changed = true;
            while (changed && pts.size() >= 3)
            {
                changed = false;
                for (std::size_t i = 0; i < pts.size(); ++i)
                {
                    const Vec2 &prev = pts[(i + pts.size() - 1) % pts.size()];
                    const Vec2 &next = pts[(i + 1) % pts.size()];
                    const Vec2 a = pts[i] - prev;
                    const Vec2 b = next - pts[i];
                    const double cross = a.x() * b.y() - a.y() * b.x();
                    if (cross <= 1e-12 * std::max(1.0, a.norm() * b.norm()))
                    {
                        pts.erase(pts.begin() + static_cast<std::ptrdiff_t>(i));
                        changed = true;
                        break;
                    }
                }
            }
            if (pts.size() < 3)
            {
                return {};
            }
            return pts;
        }

    } // namespace detail

    inline CrossSection cross_section(const Polyhedron &poly, const Vec3 &point, const Vec3 &direction)
    {
        if (!(direction.norm() > 1e-9))
        {
            throw GeometryError(GeometryError::Kind::DegenerateDirection, "section direction is zero");
        }
        if (!contains(poly, point, 1e-6))
        {
            throw GeometryError(GeometryError::Kind::DegenerateSection, "section point lies outside polyhedron");
        }

        CrossSection sec;
        sec.plane_point = point;
        sec.axis = direction.normalized();
        std::tie(sec.e1, sec.e2) = plane_basis(sec.axis);

        std::vector<detail::Halfplane> hp;
        hp.reserve(poly.size());
        for (const auto &f : poly.faces())
        {
            const double nn = f.normal.norm();
            const Vec2 n2(f.normal.dot(sec.e1) / nn, f.normal.dot(sec.e2) / nn);
            const double slack = (f.offset - f.normal.dot(point)) / nn;
            const double len = n2.norm();
            if (len < 1e-9)
            {
                if (slack < -1e-9)
                {
                    throw GeometryError(GeometryError::Kind::DegenerateSection,
                                        "section plane lies outside a parallel face");
                }
                continue;
            }
            hp.push_back({n2 / len, slack / len});
        }

        sec.vertices2d = detail::halfplane_polygon(hp);
        if (sec.vertices2d.size() < 3)
        {
            throw GeometryError(GeometryError::Kind::DegenerateSection, "section polygon is empty");
        }
        return sec;
    }

    // One halfspace per polygon edge, containing the axis direction.
    inline TubeConstraints sweep(const CrossSection &section)
    {
        TubeConstraints tube;
        tube.axis = section.axis;
        tube.plane_point = section.plane_point;
        const auto &v = section.vertices2d;
        for (std::size_t i = 0; i < v.size(); ++i)
        {
            const Vec2 edge = v[(i + 1) % v.size()] - v[i];
            const Vec2 n2 = Vec2(edge.y(), -edge.x()).normalized();
            const double support = n2.dot(v[i]);
            Vec3 n3 = n2.x() * section.e1 + n2.y() * section.e2;
            n3 -= n3.dot(section.axis) * section.axis;
            tube.rows.push_back({n3, support + n3.dot(section.plane_point)});
        }
        return tube;
    }

    inline TubeConstraints polyhedron_rows(const Polyhedron &poly)
    {
        TubeConstraints tube;
        tube.fallback = true;
        for (const auto &f : poly.faces())
        {
            tube.rows.push_back({f.normal, f.offset});
        }
        return tube;
    }

    inline TubeConstraints tube_at(const Corridor &corridor, const ReferenceTrajectory &traj, double theta)
    {
        const int idx = traj.corridor_index_at(theta);
        if (idx < 0 || static_cast<std::size_t>(idx) >= corridor.size())
        {
            throw InputError("corridor_index " + std::to_string(idx) + " out of range");
        }
        const Polyhedron &poly = corridor[static_cast<std::size_t>(idx)];
        const Vec3 point = traj.eval(theta, 0);
        const Vec3 direction = traj.eval(theta, 1);

        TubeConstraints tube;
        if (direction.norm() < 1e-6)
        {
            tube = polyhedron_rows(poly);
            tube.plane_point = point;
        }
        else
        {
            try
            {
                tube = sweep(cross_section(poly, point, direction));
            }
            catch (const GeometryError &)
            {
                tube = polyhedron_rows(poly);
                tube.plane_point = point;
                tube.axis = direction.normalized();
            }
        }
        tube.polyhedron = idx;
        return tube;
    }

} // namespace cmpcc

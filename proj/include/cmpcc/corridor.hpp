#pragma once

#include "cmpcc/error.hpp"
#include "cmpcc/trajectory.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace cmpcc
{

    // {q : normal . q <= offset}; the normal need not be unit length.
    struct Halfspace
    {
        Vec3 normal = Vec3::Zero();
        double offset = 0.0;

        // Signed Euclidean distance outside the plane (negative inside).
        double signed_distance(const Vec3 &q) const { return (normal.dot(q) - offset) / normal.norm(); }
    };

    class Polyhedron
    {
    public:
        Polyhedron() = default;

        explicit Polyhedron(std::vector<Halfspace> faces) : faces_(std::move(faces))
        {
            if (faces_.size() < 4)
            {
                throw InputError("polyhedron needs at least 4 faces, got " + std::to_string(faces_.size()));
            }
            for (std::size_t i = 0; i < faces_.size(); ++i)
            {
                if (!(faces_[i].normal.norm() > 1e-12) || !faces_[i].normal.allFinite() ||
                    !std::isfinite(faces_[i].offset))
                {
                    throw InputError("face " + std::to_string(i) + ": zero or non-finite normal");
                }
            }
        }

        const std::vector<Halfspace> &faces() const { return faces_; }
        std::size_t size() const { return faces_.size(); }

        // Largest signed face distance; <= 0 inside.
        double max_violation(const Vec3 &q) const
        {
            double worst = -std::numeric_limits<double>::infinity();
            for (const auto &f : faces_)
            {
                worst = std::max(worst, f.signed_distance(q));
            }
            return worst;
        }

        std::size_t most_violated_face(const Vec3 &q) const
        {
            std::size_t idx = 0;
            double worst = -std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < faces_.size(); ++i)
            {
                const double d = faces_[i].signed_distance(q);
                if (d > worst)
                {
                    worst = d;
                    idx = i;
                }
            }
            return idx;
        }

    private:
        std::vector<Halfspace> faces_;
    };

    inline bool contains(const Polyhedron &poly, const Vec3 &point, double tol)
    {
        for (const auto &f : poly.faces())
        {
            if (f.normal.dot(point) > f.offset + tol * f.normal.norm())
            {
                return false;
            }
        }
        return true;
    }

    inline Polyhedron intersect(const Polyhedron &a, const Polyhedron &b)
    {
        std::vector<Halfspace> faces = a.faces();
        faces.insert(faces.end(), b.faces().begin(), b.faces().end());
        return Polyhedron(std::move(faces));
    }

    namespace detail
    {

        // True when {d : n_i . d <= 0 for all faces} contains a nonzero direction.
        // The cone is clipped by the unit box and its vertices enumerated.
        inline bool has_recession_direction(const std::vector<Halfspace> &faces)
        {
            std::vector<Vec3> normals;
            normals.reserve(faces.size() + 6);
            std::vector<double> offsets;
            for (const auto &f : faces)
            {
                normals.push_back(f.normal / f.normal.norm());
                offsets.push_back(0.0);
            }
            for (int ax = 0; ax < 3; ++ax)
            {
                normals.push_back(Vec3::Unit(ax));
                offsets.push_back(1.0);
                normals.push_back(-Vec3::Unit(ax));
                offsets.push_back(1.0);
            }
            const std::size_t m = normals.size();
            for (std::size_t i = 0; i < m; ++i)
            {
                for (std::size_t j = i + 1; j < m; ++j)
                {
                    for (std::size_t k = j + 1; k < m; ++k)
                    {
                        Eigen::Matrix3d M;
                        M.row(0) = normals[i];
                        M.row(1) = normals[j];
                        M.row(2) = normals[k];
                        if (std::abs(M.determinant()) < 1e-10)
                        {
                            continue;
                        }
                        const Vec3 d = M.partialPivLu().solve(Vec3(offsets[i], offsets[j], offsets[k]));
                        if (d.norm() < 1e-6)
                        {
                            continue;
                        }
                        bool ok = true;
                        for (std::size_t r = 0; r < m && ok; ++r)
                        {
                            ok = normals[r].dot(d) <= offsets[r] + 1e-9;
                        }
                        if (ok)
                        {
                            return true;
                        }
                    }
                }
            }
            return false;
        }

    } // namespace detail

    // Vertex set by brute-force enumeration of face triples.
    inline std::vector<Vec3> vertices(const Polyhedron &poly)
    {
        const auto &faces = poly.faces();
        if (detail::has_recession_direction(faces))
        {
            throw GeometryError(GeometryError::Kind::UnboundedPolyhedron, "polyhedron is unbounded");
        }
        std::vector<Vec3> out;
        const std::size_t m = faces.size();
        for (std::size_t i = 0; i < m; ++i)
        {
            for (std::size_t j = i + 1; j < m; ++j)
            {
                for (std::size_t k = j + 1; k < m; ++k)
                {
                    Eigen::Matrix3d M;
                    M.row(0) = faces[i].normal.normalized();
                    M.row(1) = faces[j].normal.normalized();
                    M.row(2) = faces[k].normal.normalized();
                    if (std::abs(M.determinant()) < 1e-12)
                    {
                        continue;
                    }
                    const Vec3 rhs(faces[i].offset / faces[i].normal.norm(),
                                   faces[j].offset / faces[j].normal.norm(),
                                   faces[k].offset / faces[k].normal.norm());
                    const Vec3 v = M.partialPivLu().solve(rhs);
                    if (!v.allFinite() || !contains(poly, v, 1e-9))
                    {
                        continue;
                    }
                    const bool dup = std::any_of(out.begin(), out.end(),
                                                 [&](const Vec3 &w)
                                                 { return (w - v).norm() < 1e-7; });
                    if (!dup)
                    {
                        out.push_back(v);
                    }
                }
            }
        }
        return out;
    }

    struct ChebyshevBall
    {
        Vec3 center = Vec3::Zero();
        double radius = 0.0;
    };

    // Largest inscribed ball: maximize r s.t. n_i . c + r |n_i| <= b_i.
    // The LP lives in 4 variables, so its optimal vertex is found by
    // enumerating 4-row active sets. A loose box on c keeps the LP bounded.
    inline ChebyshevBall chebyshev_center(const Polyhedron &poly)
    {
        constexpr double kBox = 1e6;
        std::vector<Eigen::Vector4d> rows;
        std::vector<double> rhs;
        for (const auto &f : poly.faces())
        {
            const double nn = f.normal.norm();
            rows.emplace_back(f.normal.x() / nn, f.normal.y() / nn, f.normal.z() / nn, 1.0);
            rhs.push_back(f.offset / nn);
        }
        for (int ax = 0; ax < 3; ++ax)
        {
            Eigen::Vector4d r = Eigen::Vector4d::Zero();
            r(ax) = 1.0;
            rows.push_back(r);
            rhs.push_back(kBox);
            r(ax) = -1.0;
            rows.push_back(r);
            rhs.push_back(kBox);
        }

        const std::size_t m = rows.size();
        double best_r = -std::numeric_limits<double>::infinity();
        Eigen::Vector4d best = Eigen::Vector4d::Zero();
        for (std::size_t a = 0; a < m; ++a)
        {
            for (std::size_t b = a + 1; b < m; ++b)
            {
                for (std::size_t c = b + 1; c < m; ++c)
                {
                    for (std::size_t d = c + 1; d < m; ++d)
                    {
                        Eigen::Matrix4d M;
                        M.row(0) = rows[a];
                        M.row(1) = rows[b];
                        M.row(2) = rows[c];
                        M.row(3) = rows[d];
                        auto lu = M.fullPivLu();
                        if (lu.rank() < 4)
                        {
                            continue;
                        }
                        const Eigen::Vector4d x = lu.solve(Eigen::Vector4d(rhs[a], rhs[b], rhs[c], rhs[d]));
                        if (!x.allFinite() || x(3) <= best_r)
                        {
                            continue;
                        }
                        bool feasible = true;
                        for (std::size_t r = 0; r < m && feasible; ++r)
                        {
                            feasible = rows[r].dot(x) <= rhs[r] + 1e-9 * (1.0 + std::abs(rhs[r]));
                        }
                        if (feasible)
                        {
                            best_r = x(3);
                            best = x;
                        }
                    }
                }
            }
        }

        if (!(best_r >= 0.0))
        {
            throw GeometryError(GeometryError::Kind::EmptyPolyhedron, "polyhedron is empty");
        }
        if (best.head<3>().cwiseAbs().maxCoeff() > 0.5 * kBox ||
            detail::has_recession_direction(poly.faces()))
        {
            throw GeometryError(GeometryError::Kind::UnboundedPolyhedron, "polyhedron is unbounded");
        }
        return {best.head<3>(), best_r};
    }

    // Ordered sequence of overlapping polyhedra.
    class Corridor
    {
    public:
        static constexpr double kMinRadius = 1e-6;

        enum class Validation
        {
            Full,
            None
        };

        Corridor() = default;

        explicit Corridor(std::vector<Polyhedron> polyhedra, Validation validation = Validation::Full)
            : polyhedra_(std::move(polyhedra))
        {
            if (polyhedra_.empty())
            {
                throw InputError("corridor has no polyhedra");
            }
            radii_.assign(polyhedra_.size(), 0.0);
            if (validation == Validation::None)
            {
                return;
            }
            for (std::size_t i = 0; i < polyhedra_.size(); ++i)
            {
                ChebyshevBall ball;
                try
                {
                    ball = chebyshev_center(polyhedra_[i]);
                }
                catch (const GeometryError &e)
                {
                    throw InputError("polyhedron " + std::to_string(i) + ": " + e.what());
                }
                if (!(ball.radius > kMinRadius))
                {
                    throw InputError("polyhedron " + std::to_string(i) + ": empty interior");
                }
                radii_[i] = ball.radius;
            }
            for (std::size_t i = 0; i + 1 < polyhedra_.size(); ++i)
            {
                if (!(overlap_radius(i) > kMinRadius))
                {
                    throw InputError("polyhedra " + std::to_string(i) + " and " + std::to_string(i + 1) +
                                     " do not overlap");
                }
            }
        }

        const std::vector<Polyhedron> &polyhedra() const { return polyhedra_; }
        const Polyhedron &operator[](std::size_t i) const { return polyhedra_.at(i); }
        std::size_t size() const { return polyhedra_.size(); }

        // Chebyshev radius of polyhedron i (0 when built without validation).
        double radius(std::size_t i) const { return radii_.at(i); }

        // Chebyshev radius of polyhedron i intersected with i + 1; negative when disjoint.
        double overlap_radius(std::size_t i) const
        {
            try
            {
                return chebyshev_center(intersect(polyhedra_.at(i), polyhedra_.at(i + 1))).radius;
            }
            catch (const GeometryError &e)
            {
                if (e.kind() == GeometryError::Kind::EmptyPolyhedron)
                {
                    return -1.0;
                }
                throw;
            }
        }

        // Signed clearance to the corridor union: positive inside some polyhedron.
        double margin(const Vec3 &q) const
        {
            double best = -std::numeric_limits<double>::infinity();
            for (const auto &p : polyhedra_)
            {
                best = std::max(best, -p.max_violation(q));
            }
            return best;
        }

    private:
        std::vector<Polyhedron> polyhedra_;
        std::vector<double> radii_;
    };

} // namespace cmpcc

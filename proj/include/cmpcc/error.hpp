#pragma once

#include <stdexcept>
#include <string>

namespace cmpcc
{

    // Malformed input files or values that break a documented invariant.
    class InputError : public std::runtime_error
    {
    public:
        explicit InputError(const std::string &what) : std::runtime_error(what) {}
    };

    class GeometryError : public std::runtime_error
    {
    public:
        enum class Kind
        {
            EmptyPolyhedron,
            UnboundedPolyhedron,
            DegenerateSection,
            DegenerateDirection
        };

        GeometryError(Kind kind, const std::string &what)
            : std::runtime_error(what), kind_(kind) {}

        Kind kind() const { return kind_; }

    private:
        Kind kind_;
    };

    class QpError : public std::runtime_error
    {
    public:
        enum class Kind
        {
            DimensionMismatch,
            NonConvex
        };

        QpError(Kind kind, const std::string &what)
            : std::runtime_error(what), kind_(kind) {}

        Kind kind() const { return kind_; }

    private:
        Kind kind_;
    };

} // namespace cmpcc

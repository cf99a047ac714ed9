#pragma once

#include "cmpcc/corridor.hpp"
#include "cmpcc/error.hpp"
#include "cmpcc/mpcc.hpp"
#include "cmpcc/sim.hpp"
#include "cmpcc/trajectory.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

namespace cmpcc
{

    using Json = nlohmann::json;

    namespace io_detail
    {
        // A JSON value together with its pointer inside the document.
        class Node
        {
        public:
            Node(const Json &value, std::string pointer) : value_(value), pointer_(std::move(pointer)) {}

            const Json &value() const { return value_; }
            const std::string &pointer() const { return pointer_; }

            [[noreturn]] void fail(const std::string &what) const
            {
                throw InputError((pointer_.empty() ? std::string("/") : pointer_) + ": " + what);
            }

            bool has(const std::string &key) const { return value_.is_object() && value_.contains(key); }

            Node at(const std::string &key) const
            {
                if (!value_.is_object())
                {
                    fail("expected an object");
                }
                if (!value_.contains(key))
                {
                    fail("missing field \"" + key + "\"");
                }
                return {value_.at(key), pointer_ + "/" + key};
            }

            Node at(std::size_t i) const { return {value_.at(i), pointer_ + "/" + std::to_string(i)}; }

            void only(std::initializer_list<const char *> keys) const
            {
                if (!value_.is_object())
                {
                    fail("expected an object");
                }
                for (const auto &item : value_.items())
                {
                    bool known = false;
                    for (const char *k : keys)
                    {
                        known = known || item.key() == k;
                    }
                    if (!known)
                    {
                        Node(item.value(), pointer_ + "/" + item.key()).fail("unknown field");
                    }
                }
            }

            std::size_t array_size() const
            {
                if (!value_.is_array())
                {
                    fail("expected an array");
                }
                return value_.size();
            }

            double number() const
            {
                if (!value_.is_number())
                {
                    fail("expected a number");
                }
                const double v = value_.get<double>();
                if (!std::isfinite(v))
                {
                    fail("expected a finite number");
                }
                return v;
            }

            int integer() const
            {
                if (!value_.is_number_integer())
                {
                    fail("expected an integer");
                }
                return value_.get<int>();
            }

            bool boolean() const
            {
                if (!value_.is_boolean())
                {
                    fail("expected a boolean");
                }
                return value_.get<bool>();
            }

            std::string string() const
            {
                if (!value_.is_string())
                {
                    fail("expected a string");
                }
                return value_.get<std::string>();
            }

            std::vector<double> numbers() const
            {
                std::vector<double> out(array_size());
                for (std::size_t i = 0; i < out.size(); ++i)
                {
                    out[i] = at(i).number();
                }
                return out;
            }

            Vec3 vec3() const
            {
                if (array_size() != 3)
                {
                    fail("expected 3 numbers");
                }
                return {at(0).number(), at(1).number(), at(2).number()};
            }

        private:
            const Json &value_;
            std::string pointer_;
        };

        inline Json read_json(const std::filesystem::path &path)
        {
            std::ifstream in(path);
            if (!in)
            {
                throw InputError(path.string() + ": cannot open file");
            }
            try
            {
                return Json::parse(in);
            }
            catch (const Json::parse_error &e)
            {
                throw InputError(path.string() + ": invalid JSON: " + e.what());
            }
        }

        template <class F>
        auto with_file(const std::filesystem::path &path, F &&f)
        {
            try
            {
                return f(read_json(path));
            }
            catch (const InputError &e)
            {
                const std::string what = e.what();
                if (what.rfind(path.string() + ":", 0) == 0)
                {
                    throw;
                }
                throw InputError(path.string() + ": " + what);
            }
        }
    } // namespace io_detail

    inline ReferenceTrajectory trajectory_from_json(const Json &doc,
                                                    ReferenceTrajectory::Validation validation =
                                                        ReferenceTrajectory::Validation::Full)
    {
        const io_detail::Node root(doc, "");
        root.only({"t0", "segments"});
        const double t0 = root.has("t0") ? root.at("t0").number() : 0.0;
        const io_detail::Node segs = root.at("segments");
        std::vector<PolySegment> segments(segs.array_size());
        for (std::size_t i = 0; i < segments.size(); ++i)
        {
            const io_detail::Node s = segs.at(i);
            s.only({"duration", "corridor_index", "coeffs"});
            segments[i].duration = s.at("duration").number();
            segments[i].corridor_index = s.at("corridor_index").integer();
            const io_detail::Node c = s.at("coeffs");
            c.only({"x", "y", "z"});
            segments[i].coeffs = {c.at("x").numbers(), c.at("y").numbers(), c.at("z").numbers()};
        }
        return ReferenceTrajectory(t0, std::move(segments), validation);
    }

    inline Corridor corridor_from_json(const Json &doc, Corridor::Validation validation = Corridor::Validation::Full)
    {
        const io_detail::Node root(doc, "");
        root.only({"polyhedra"});
        const io_detail::Node polys = root.at("polyhedra");
        std::vector<Polyhedron> out;
        for (std::size_t i = 0; i < polys.array_size(); ++i)
        {
            const io_detail::Node p = polys.at(i);
            p.only({"faces"});
            const io_detail::Node faces = p.at("faces");
            std::vector<Halfspace> hs;
            for (std::size_t j = 0; j < faces.array_size(); ++j)
            {
                const io_detail::Node f = faces.at(j);
                f.only({"normal", "offset"});
                hs.push_back({f.at("normal").vec3(), f.at("offset").number()});
            }
            try
            {
                out.emplace_back(std::move(hs));
            }
            catch (const InputError &e)
            {
                p.fail(e.what());
            }
        }
        return Corridor(std::move(out), validation);
    }

    inline MpccConfig mpcc_from_json(const Json &doc, const std::string &pointer = "/mpcc")
    {
        const io_detail::Node root(doc, pointer);
        root.only({"N", "dt", "rho", "limits", "terminal_eps", "recovery"});
        MpccConfig c;
        if (root.has("N"))
        {
            c.N = root.at("N").integer();
        }
        if (root.has("dt"))
        {
            c.dt = root.at("dt").number();
        }
        if (root.has("rho"))
        {
            c.rho = root.at("rho").number();
        }
        if (root.has("terminal_eps"))
        {
            c.terminal_eps = root.at("terminal_eps").number();
        }
        if (root.has("recovery"))
        {
            c.recovery = root.at("recovery").boolean();
        }
        if (root.has("limits"))
        {
            const io_detail::Node l = root.at("limits");
            l.only({"v_max", "a_max", "j_max", "v_t_max", "a_t_max", "j_t_max"});
            Limits &lim = c.limits;
            if (l.has("v_max"))
            {
                lim.v_max = l.at("v_max").vec3();
            }
            if (l.has("a_max"))
            {
                lim.a_max = l.at("a_max").vec3();
            }
            if (l.has("j_max"))
            {
                lim.j_max = l.at("j_max").vec3();
            }
            if (l.has("v_t_max"))
            {
                lim.v_t_max = l.at("v_t_max").number();
            }
            if (l.has("a_t_max"))
            {
                lim.a_t_max = l.at("a_t_max").number();
            }
            if (l.has("j_t_max"))
            {
                lim.j_t_max = l.at("j_t_max").number();
            }
        }
        try
        {
            c.validate();
        }
        catch (const InputError &e)
        {
            root.fail(e.what());
        }
        return c;
    }

    inline ReferenceTrajectory load_trajectory(const std::filesystem::path &path,
                                               ReferenceTrajectory::Validation validation =
                                                   ReferenceTrajectory::Validation::Full)
    {
        return io_detail::with_file(path, [&](const Json &doc) { return trajectory_from_json(doc, validation); });
    }

    inline Corridor load_corridor(const std::filesystem::path &path,
                                  Corridor::Validation validation = Corridor::Validation::Full)
    {
        return io_detail::with_file(path, [&](const Json &doc) { return corridor_from_json(doc, validation); });
    }

    // Trajectory and corridor paths are resolved against the scenario file's directory.
    inline Scenario load_scenario(const std::filesystem::path &path)
    {
        const Json doc = io_detail::read_json(path);
        const std::filesystem::path base = path.parent_path();
        auto resolve = [&](const std::string &p) {
            const std::filesystem::path q(p);
            return q.is_absolute() ? q : base / q;
        };
        Scenario sc;
        std::filesystem::path traj_path;
        std::filesystem::path corr_path;
        try
        {
            const io_detail::Node root(doc, "");
            root.only({"name", "trajectory", "corridor", "mpcc", "start", "disturbances", "duration_s", "seed",
                       "gust_std", "stop_at_goal"});
            sc.name = root.has("name") ? root.at("name").string() : path.stem().string();
            traj_path = resolve(root.at("trajectory").string());
            corr_path = resolve(root.at("corridor").string());
            sc.config = root.has("mpcc") ? mpcc_from_json(root.at("mpcc").value()) : MpccConfig{};
            const io_detail::Node start = root.at("start");
            start.only({"position", "velocity"});
            sc.start_position = start.at("position").vec3();
            sc.start_velocity = start.has("velocity") ? start.at("velocity").vec3() : Vec3(Vec3::Zero());
            if (root.has("disturbances"))
            {
                const io_detail::Node ds = root.at("disturbances");
                for (std::size_t i = 0; i < ds.array_size(); ++i)
                {
                    const io_detail::Node d = ds.at(i);
                    d.only({"kind", "start", "duration", "accel"});
                    Disturbance dist;
                    const std::string kind = d.at("kind").string();
                    if (kind == "impulse")
                    {
                        dist.kind = DisturbanceKind::Impulse;
                    }
                    else if (kind == "wind")
                    {
                        dist.kind = DisturbanceKind::Wind;
                    }
                    else
                    {
                        d.at("kind").fail("expected \"impulse\" or \"wind\"");
                    }
                    dist.start = d.at("start").number();
                    dist.duration = d.at("duration").number();
                    if (!(dist.duration > 0.0))
                    {
                        d.at("duration").fail("must be positive");
                    }
                    dist.accel = d.at("accel").vec3();
                    sc.disturbances.push_back(dist);
                }
            }
            sc.duration = root.at("duration_s").number();
            if (!(sc.duration > 0.0))
            {
                root.at("duration_s").fail("must be positive");
            }
            if (root.has("seed"))
            {
                const io_detail::Node s = root.at("seed");
                if (!s.value().is_number_unsigned())
                {
                    s.fail("expected a non-negative integer");
                }
                sc.seed = s.value().get<std::uint64_t>();
            }
            if (root.has("gust_std"))
            {
                sc.gust_std = root.at("gust_std").number();
                if (sc.gust_std < 0.0)
                {
                    root.at("gust_std").fail("must be non-negative");
                }
            }
            if (root.has("stop_at_goal"))
            {
                sc.stop_at_goal = root.at("stop_at_goal").boolean();
            }
        }
        catch (const InputError &e)
        {
            throw InputError(path.string() + ": " + e.what());
        }
        sc.trajectory = load_trajectory(traj_path);
        sc.corridor = load_corridor(corr_path);
        return sc;
    }

} // namespace cmpcc

#pragma once

#include "urbanlens/error.hpp"
#include "urbanlens/geo.hpp"
#include "urbanlens/resample.hpp"
#include "urbanlens/util.hpp"

#include <cstdio>
#include <unistd.h>
#include <filesystem>
#include <string>
#include <vector>

namespace ul::test {

// Axis-aligned unit squares in a rows x cols grid, ids "G0000".. row-major.
inline geo::RegionSet square_grid(std::size_t rows, std::size_t cols, double size = 1.0)
{
    std::vector<geo::GeoUnit> units;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            char id[32];
            std::snprintf(id, sizeof id, "G%04zu", r * cols + c);
            const double x0 = static_cast<double>(c) * size, y0 = static_cast<double>(r) * size;
            geo::GeoUnit u;
            u.region_id = id;
            u.name = id;
            u.rings.push_back({{x0, y0}, {x0 + size, y0}, {x0 + size, y0 + size}, {x0, y0 + size}, {x0, y0}});
            units.push_back(std::move(u));
        }
    }
    return geo::RegionSet(std::move(units));
}

// Two gaussian blobs: class 1 shifted by `shift` in every dimension.
inline resample::LabeledSet blobs(std::size_t majority, std::size_t minority, std::size_t features,
                                  std::uint64_t seed, double shift = 1.5)
{
    resample::LabeledSet d;
    for (std::size_t f = 0; f < features; ++f) {
        d.feature_names.push_back("f" + std::to_string(f));
    }
    Rng rng = derive_rng(seed, 0xb10b5);
    std::vector<double> x(features);
    std::int64_t id = 0;
    for (std::size_t i = 0; i < majority + minority; ++i) {
        const int label = i < majority ? 0 : 1;
        for (auto& v : x) {
            v = normal(rng) + (label ? shift : 0.0);
        }
        d.push_row(x, label, id++);
    }
    return d;
}

// Throws unless fn raises ul::Error with the given kind.
template <typename F>
std::string error_kind(F&& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    return "<none>";
}

class TempDir {
public:
    TempDir()
    {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("urbanlens-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    std::string str() const { return path_.string(); }
    std::filesystem::path path() const { return path_; }

private:
    std::filesystem::path path_;
};

} // namespace ul::test

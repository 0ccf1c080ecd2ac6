// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "divgen/diffcore.hpp"
#include "divgen/rng.hpp"

namespace divgen {

using Point2 = std::array<double, 2>;

// Smooth multi-lobed star region. Boundary radius is periodic in the polar
// angle with one lobe per arm, ranging between r_inner and r_outer.
struct StarSpec {
  std::size_t arms = 5;
  double r_inner = 0.35;
  double r_outer = 1.0;
  Point2 center{0.0, 0.0};
  double rotation = 0.0;

  void validate() const;
};

// R(theta) = r_inner + (r_outer - r_inner) * (1/2 + 1/2 cos(arms * (theta - rotation)))
double star_boundary_radius(const StarSpec& spec, double theta);

bool inside_star(const StarSpec& spec, const Point2& p);

// Uniform draw over the star region by rejection from the enclosing disk.
// Throws NumericError after 10000 consecutive rejections.
Point2 sample_star_action(const StarSpec& spec, Rng& rng);

inline constexpr double kDefaultWarpGamma = 1.5;

// Swirl: rotate by gamma * |a| radians, then scale by (1 + |a| / 2).
// Deterministic, fixes the origin, injective on the star region.
Point2 warp_to_state(const Point2& a, double gamma = kDefaultWarpGamma);

struct Transition {
  Point2 s_t{0.0, 0.0};
  Point2 a_t{0.0, 0.0};
  Point2 s_next{0.0, 0.0};
};

struct Dataset {
  std::vector<Transition> transitions;
  StarSpec spec;
  std::uint64_t seed = 0;
  std::string split;  // "train" or "test"

  std::size_t size() const { return transitions.size(); }
  // All actions (or next states) as an [n, 2] tensor.
  Tensor actions() const;
  Tensor next_states() const;
};

// Train and test transitions drawn from independent streams of `seed`.
// Every s_t is the origin; s_next = warp_to_state(a_t).
std::pair<Dataset, Dataset> generate_dataset(const StarSpec& spec,
                                             std::size_t n_train,
                                             std::size_t n_test,
                                             std::uint64_t seed);

// CSV with one transition per row plus a JSON sidecar (path + ".json")
// holding the star spec, seed and rng algorithm. Values round-trip exactly.
void save_dataset(const Dataset& d, const std::string& path);
Dataset load_dataset(const std::string& path);
std::string dataset_sidecar_path(const std::string& path);

// Exact decimal formatting helpers shared by the tabular writers: shortest
// representation that parses back to the identical double.
std::string format_double(double v);
double parse_double(const std::string& s, std::size_t line_no);

}  // namespace divgen

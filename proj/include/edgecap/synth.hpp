#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "edgecap/dataset.hpp"
#include "edgecap/image.hpp"
#include "edgecap/rng.hpp"

namespace edgecap {

enum class ObjectClass { building, road, runway, tank };
enum class Background { grass, water, sand, gray };

std::string class_noun(ObjectClass c, bool plural);
std::string background_phrase(Background b);

struct SceneObject {
  ObjectClass cls = ObjectClass::building;
  // Rectangle/circle: centre + half extents; stripes: offset + width along
  // the cross axis, horizontal flag.
  int x = 0, y = 0;
  int w = 0, h = 0;
  bool horizontal = true;
};

struct Scene {
  Background background = Background::grass;
  std::vector<SceneObject> objects;  // 1..3, at most 2 distinct classes
  double jitter = 0.0;               // per-scene colour perturbation
};

Scene sample_scene(Rng& rng);

// 64x64 RGB rendering: flat background, stripes below solids.
Image render_scene(const Scene& scene, int size = 64);

// Five paraphrases; each mentions every rendered class (with its count) and
// the background.
std::vector<std::string> scene_captions(const Scene& scene);

// Writes out_dir/images/scene_NNNN.ppm and out_dir/dataset.json with an
// 80/10/10 split (floor(n*0.8) train, floor(n*0.1) val, rest test). Output is
// a pure function of (n, seed). Requires n >= 10.
Dataset gen_synthetic(int n, std::uint64_t seed, const std::filesystem::path& out_dir);

}  // namespace edgecap

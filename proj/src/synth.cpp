#include "edgecap/synth.hpp"

#include <algorithm>
#include <array>
#include <cstdio>

#include "edgecap/netpbm.hpp"

namespace edgecap {

namespace {

struct Rgb {
  double r, g, b;
};

Rgb background_color(Background b) {
  switch (b) {
    case Background::grass: return {0.20, 0.55, 0.20};
    case Background::water: return {0.15, 0.30, 0.65};
    case Background::sand: return {0.80, 0.70, 0.45};
    case Background::gray: return {0.55, 0.55, 0.55};
  }
  throw ParameterError("synth: invalid background");
}

Rgb class_color(ObjectClass c) {
  switch (c) {
    case ObjectClass::building: return {0.85, 0.15, 0.10};
    case ObjectClass::road: return {0.25, 0.25, 0.25};
    case ObjectClass::runway: return {0.08, 0.08, 0.08};
    case ObjectClass::tank: return {0.95, 0.95, 0.95};
  }
  throw ParameterError("synth: invalid object class");
}

bool is_stripe(ObjectClass c) { return c == ObjectClass::road || c == ObjectClass::runway; }

void fill_pixel(Image& img, int y, int x, const Rgb& c, double jitter) {
  img.at(y, x, 0) = std::clamp(c.r + jitter, 0.0, 1.0);
  img.at(y, x, 1) = std::clamp(c.g + jitter, 0.0, 1.0);
  img.at(y, x, 2) = std::clamp(c.b + jitter, 0.0, 1.0);
}

// Count word + noun, e.g. "a building", "two tanks".
std::string count_phrase(int count, ObjectClass c) {
  static const std::array<const char*, 4> kCounts = {"", "a", "two", "three"};
  if (count < 1 || count > 3) throw ParameterError("synth: object count out of range");
  return std::string(kCounts[static_cast<size_t>(count)]) + " " + class_noun(c, count > 1);
}

}  // namespace

std::string class_noun(ObjectClass c, bool plural) {
  const char* base = nullptr;
  switch (c) {
    case ObjectClass::building: base = "building"; break;
    case ObjectClass::road: base = "road"; break;
    case ObjectClass::runway: base = "runway"; break;
    case ObjectClass::tank: base = "tank"; break;
  }
  if (!base) throw ParameterError("synth: invalid object class");
  return plural ? std::string(base) + "s" : std::string(base);
}

std::string background_phrase(Background b) {
  switch (b) {
    case Background::grass: return "on the grass";
    case Background::water: return "on the water";
    case Background::sand: return "on the sand";
    case Background::gray: return "on the gray ground";
  }
  throw ParameterError("synth: invalid background");
}

Scene sample_scene(Rng& rng) {
  constexpr int kSize = 64;
  Scene scene;
  scene.background = static_cast<Background>(rng.uniform_int(4));
  scene.jitter = rng.uniform(-0.03, 0.03);

  const int distinct = 1 + rng.uniform_int(2);
  std::array<ObjectClass, 2> classes{};
  classes[0] = static_cast<ObjectClass>(rng.uniform_int(4));
  std::array<int, 2> counts{0, 0};
  if (distinct == 1) {
    counts[0] = 1 + rng.uniform_int(3);
  } else {
    int second = rng.uniform_int(3);
    if (second >= static_cast<int>(classes[0])) ++second;
    classes[1] = static_cast<ObjectClass>(second);
    // Totals capped at 3 objects.
    if (rng.uniform_int(2) == 0) {
      counts = {1, 1};
    } else {
      counts = rng.uniform_int(2) == 0 ? std::array<int, 2>{2, 1} : std::array<int, 2>{1, 2};
    }
  }

  // Caption order is canonical (enum order); sort the class slots so captions
  // and rendering agree on it.
  std::array<std::pair<ObjectClass, int>, 2> slots = {
      std::make_pair(classes[0], counts[0]), std::make_pair(classes[1], counts[1])};
  if (distinct == 2 && slots[1].first < slots[0].first) std::swap(slots[0], slots[1]);

  for (int s = 0; s < distinct; ++s) {
    const ObjectClass cls = slots[static_cast<size_t>(s)].first;
    const int count = slots[static_cast<size_t>(s)].second;
    for (int i = 0; i < count; ++i) {
      SceneObject obj;
      obj.cls = cls;
      for (int attempt = 0; attempt < 40; ++attempt) {
        if (is_stripe(cls)) {
          obj.horizontal = rng.uniform_int(2) == 0;
          obj.w = cls == ObjectClass::road ? 5 + rng.uniform_int(3) : 2 + rng.uniform_int(2);
          obj.x = rng.uniform_int(kSize - obj.w);
        } else if (cls == ObjectClass::building) {
          obj.w = 9 + rng.uniform_int(6);
          obj.h = 9 + rng.uniform_int(6);
          obj.x = rng.uniform_int(kSize - obj.w);
          obj.y = rng.uniform_int(kSize - obj.h);
        } else {  // tank
          obj.w = 5 + rng.uniform_int(3);  // radius
          obj.x = obj.w + rng.uniform_int(kSize - 2 * obj.w);
          obj.y = obj.w + rng.uniform_int(kSize - 2 * obj.w);
        }
        bool clash = false;
        for (const SceneObject& other : scene.objects) {
          if (is_stripe(cls) && is_stripe(other.cls)) {
            clash = other.horizontal == obj.horizontal &&
                    std::abs(other.x - obj.x) < other.w + obj.w + 2;
          } else if (!is_stripe(cls) && !is_stripe(other.cls)) {
            const int ax0 = cls == ObjectClass::tank ? obj.x - obj.w : obj.x;
            const int ax1 = cls == ObjectClass::tank ? obj.x + obj.w : obj.x + obj.w;
            const int ay0 = cls == ObjectClass::tank ? obj.y - obj.w : obj.y;
            const int ay1 = cls == ObjectClass::tank ? obj.y + obj.w : obj.y + obj.h;
            const int bx0 = other.cls == ObjectClass::tank ? other.x - other.w : other.x;
            const int bx1 = other.cls == ObjectClass::tank ? other.x + other.w : other.x + other.w;
            const int by0 = other.cls == ObjectClass::tank ? other.y - other.w : other.y;
            const int by1 = other.cls == ObjectClass::tank ? other.y + other.w : other.y + other.h;
            clash = ax0 < bx1 + 2 && bx0 < ax1 + 2 && ay0 < by1 + 2 && by0 < ay1 + 2;
          }
          if (clash) break;
        }
        if (!clash) break;
      }
      scene.objects.push_back(obj);
    }
  }
  return scene;
}

Image render_scene(const Scene& scene, int size) {
  Image img = Image::zeros(size, size, 3);
  const Rgb bg = background_color(scene.background);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) fill_pixel(img, y, x, bg, scene.jitter);

  // Stripes first so buildings/tanks sit on top of roads.
  for (int pass = 0; pass < 2; ++pass) {
    for (const SceneObject& obj : scene.objects) {
      if (is_stripe(obj.cls) != (pass == 0)) continue;
      const Rgb color = class_color(obj.cls);
      if (is_stripe(obj.cls)) {
        for (int off = 0; off < obj.w; ++off) {
          const int line = obj.x + off;
          for (int t = 0; t < size; ++t) {
            if (obj.horizontal)
              fill_pixel(img, line, t, color, scene.jitter);
            else
              fill_pixel(img, t, line, color, scene.jitter);
          }
        }
      } else if (obj.cls == ObjectClass::building) {
        for (int y = obj.y; y < obj.y + obj.h; ++y)
          for (int x = obj.x; x < obj.x + obj.w; ++x) fill_pixel(img, y, x, color, scene.jitter);
      } else {  // tank: filled circle, radius obj.w
        for (int y = obj.y - obj.w; y <= obj.y + obj.w; ++y)
          for (int x = obj.x - obj.w; x <= obj.x + obj.w; ++x) {
            if (y < 0 || y >= size || x < 0 || x >= size) continue;
            const int dy = y - obj.y;
            const int dx = x - obj.x;
            if (dy * dy + dx * dx <= obj.w * obj.w) fill_pixel(img, y, x, color, scene.jitter);
          }
      }
    }
  }
  return img;
}

std::vector<std::string> scene_captions(const Scene& scene) {
  // Canonical class->count summary in enum order.
  std::vector<std::pair<ObjectClass, int>> summary;
  for (const SceneObject& obj : scene.objects) {
    bool found = false;
    for (auto& [cls, count] : summary)
      if (cls == obj.cls) {
        ++count;
        found = true;
      }
    if (!found) summary.emplace_back(obj.cls, 1);
  }
  std::sort(summary.begin(), summary.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  std::string objs = count_phrase(summary[0].second, summary[0].first);
  if (summary.size() > 1) objs += " near " + count_phrase(summary[1].second, summary[1].first);
  const std::string bg = background_phrase(scene.background);
  const bool plural = summary[0].second > 1;

  return {
      std::string("there ") + (plural ? "are " : "is ") + objs + " " + bg,
      objs + " can be seen " + bg,
      "an aerial view shows " + objs + " " + bg,
      "this image shows " + objs + " " + bg,
      "a satellite photo of " + objs + " " + bg,
  };
}

Dataset gen_synthetic(int n, std::uint64_t seed, const std::filesystem::path& out_dir) {
  if (n < 10) throw ParameterError("gen_synthetic: need n >= 10, got " + std::to_string(n));
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "images", ec);
  if (ec)
    throw IoError("gen_synthetic: cannot create " + (out_dir / "images").string() + ": " +
                  ec.message());

  const int n_train = n * 8 / 10;
  const int n_val = n / 10;

  Rng rng(seed);
  Dataset ds;
  ds.root = out_dir;
  for (int i = 0; i < n; ++i) {
    const Scene scene = sample_scene(rng);
    const Image img = render_scene(scene);
    char name[32];
    std::snprintf(name, sizeof(name), "images/scene_%04d.ppm", i);
    save_netpbm_file(img, out_dir / name);
    DatasetItem item;
    item.filename = name;
    item.split = i < n_train ? Split::train : (i < n_train + n_val ? Split::val : Split::test);
    item.captions = scene_captions(scene);
    ds.items.push_back(std::move(item));
  }
  write_dataset_json(ds, out_dir / "dataset.json");
  return ds;
}

}  // namespace edgecap

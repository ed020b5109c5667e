#include "gfl/synth.hpp"

#include <algorithm>
#include <cmath>

#include "gfl/rng.hpp"
#include "op_detail.hpp"

namespace gfl {

namespace {

struct Rgb {
  double r, g, b;
};

// Palettes in [0,1]; sized to the largest variant counts the schema allows.
constexpr Rgb kFacePalette[] = {
    {0.98, 0.86, 0.72}, {0.92, 0.74, 0.56}, {0.80, 0.60, 0.44}, {0.64, 0.46, 0.32},
    {0.50, 0.35, 0.24}, {0.38, 0.26, 0.18}, {0.96, 0.80, 0.78}, {0.88, 0.70, 0.62},
};
constexpr Rgb kHairPalette[] = {
    {0.12, 0.10, 0.08}, {0.35, 0.22, 0.10}, {0.62, 0.42, 0.16}, {0.85, 0.72, 0.35},
    {0.55, 0.12, 0.08}, {0.45, 0.45, 0.50}, {0.20, 0.30, 0.60}, {0.50, 0.20, 0.55},
};
constexpr Rgb kBackgroundPalette[] = {
    {0.55, 0.75, 0.95}, {0.95, 0.85, 0.60}, {0.70, 0.90, 0.70}, {0.90, 0.65, 0.70},
    {0.80, 0.80, 0.85}, {0.60, 0.55, 0.80},
};
constexpr Rgb kEyeColor{0.08, 0.08, 0.10};

class Canvas {
 public:
  explicit Canvas(int64_t size) : size_(size), pix_(static_cast<size_t>(size * size)) {}

  void clear(Rgb c) {
    for (auto& p : pix_) p = c;
  }

  // All coordinates are fractions of the image side.
  void fill_ellipse(double cx, double cy, double rx, double ry, Rgb c) {
    for_each_pixel([&](double x, double y) {
      const double dx = (x - cx) / rx, dy = (y - cy) / ry;
      return dx * dx + dy * dy <= 1.0;
    }, c);
  }

  void fill_rect(double x0, double y0, double x1, double y1, Rgb c) {
    for_each_pixel([&](double x, double y) { return x >= x0 && x <= x1 && y >= y0 && y <= y1; },
                   c);
  }

  // Triangle with apex up or down via the three corners.
  void fill_triangle(double ax, double ay, double bx, double by, double cx, double cy, Rgb c) {
    auto side = [](double px, double py, double qx, double qy, double rx, double ry) {
      return (qx - px) * (ry - py) - (qy - py) * (rx - px);
    };
    for_each_pixel(
        [&](double x, double y) {
          const double d1 = side(ax, ay, bx, by, x, y);
          const double d2 = side(bx, by, cx, cy, x, y);
          const double d3 = side(cx, cy, ax, ay, x, y);
          const bool has_neg = d1 < 0 || d2 < 0 || d3 < 0;
          const bool has_pos = d1 > 0 || d2 > 0 || d3 > 0;
          return !(has_neg && has_pos);
        },
        c);
  }

  Tensor to_tensor() const {
    Tensor t({3, size_, size_});
    for (int64_t y = 0; y < size_; ++y)
      for (int64_t x = 0; x < size_; ++x) {
        const Rgb& p = pix_[static_cast<size_t>(y * size_ + x)];
        t.at(0, y, x) = 2.0 * p.r - 1.0;
        t.at(1, y, x) = 2.0 * p.g - 1.0;
        t.at(2, y, x) = 2.0 * p.b - 1.0;
      }
    return t;
  }

 private:
  template <typename Pred>
  void for_each_pixel(Pred inside, Rgb c) {
    for (int64_t y = 0; y < size_; ++y)
      for (int64_t x = 0; x < size_; ++x) {
        const double fx = (static_cast<double>(x) + 0.5) / static_cast<double>(size_);
        const double fy = (static_cast<double>(y) + 0.5) / static_cast<double>(size_);
        if (inside(fx, fy)) pix_[static_cast<size_t>(y * size_ + x)] = c;
      }
  }

  int64_t size_;
  std::vector<Rgb> pix_;
};

void draw_face(Canvas& cv, int shape, Rgb c) {
  switch (shape % 7) {
    case 0: cv.fill_ellipse(0.5, 0.58, 0.30, 0.30, c); break;                      // round
    case 1: cv.fill_ellipse(0.5, 0.58, 0.36, 0.26, c); break;                      // wide
    case 2: cv.fill_ellipse(0.5, 0.56, 0.24, 0.34, c); break;                      // tall
    case 3: cv.fill_rect(0.22, 0.32, 0.78, 0.86, c); break;                        // square
    case 4:
      cv.fill_rect(0.26, 0.36, 0.74, 0.84, c);
      cv.fill_ellipse(0.5, 0.38, 0.24, 0.10, c);
      break;                                                                        // rounded
    case 5: cv.fill_triangle(0.5, 0.26, 0.18, 0.86, 0.82, 0.86, c); break;          // wedge
    default:
      cv.fill_ellipse(0.5, 0.62, 0.30, 0.24, c);
      cv.fill_triangle(0.5, 0.30, 0.26, 0.62, 0.74, 0.62, c);
      break;                                                                        // heart
  }
}

void draw_hair(Canvas& cv, int style, Rgb c) {
  switch (style % 8) {
    case 0: break;  // bald
    case 1: cv.fill_rect(0.24, 0.24, 0.76, 0.38, c); break;                 // flat fringe
    case 2: cv.fill_ellipse(0.5, 0.32, 0.34, 0.14, c); break;               // bowl
    case 3:
      cv.fill_ellipse(0.32, 0.30, 0.12, 0.12, c);
      cv.fill_ellipse(0.5, 0.26, 0.12, 0.12, c);
      cv.fill_ellipse(0.68, 0.30, 0.12, 0.12, c);
      break;                                                                // curls
    case 4:
      cv.fill_triangle(0.30, 0.36, 0.38, 0.16, 0.46, 0.36, c);
      cv.fill_triangle(0.46, 0.36, 0.54, 0.14, 0.62, 0.36, c);
      cv.fill_triangle(0.58, 0.36, 0.68, 0.18, 0.74, 0.36, c);
      break;                                                                // spikes
    case 5:
      cv.fill_ellipse(0.5, 0.32, 0.34, 0.14, c);
      cv.fill_rect(0.18, 0.30, 0.30, 0.74, c);
      cv.fill_rect(0.70, 0.30, 0.82, 0.74, c);
      break;                                                                // long
    case 6: cv.fill_rect(0.40, 0.18, 0.60, 0.34, c); break;                 // top knot
    default:
      cv.fill_ellipse(0.5, 0.30, 0.30, 0.12, c);
      cv.fill_ellipse(0.24, 0.40, 0.08, 0.16, c);
      cv.fill_ellipse(0.76, 0.40, 0.08, 0.16, c);
      break;                                                                // side puffs
  }
}

void draw_eyes(Canvas& cv, int style) {
  switch (style % 3) {
    case 0:
      cv.fill_ellipse(0.38, 0.56, 0.045, 0.045, kEyeColor);
      cv.fill_ellipse(0.62, 0.56, 0.045, 0.045, kEyeColor);
      break;  // dots
    case 1:
      cv.fill_rect(0.32, 0.545, 0.44, 0.585, kEyeColor);
      cv.fill_rect(0.56, 0.545, 0.68, 0.585, kEyeColor);
      break;  // bars
    default:
      cv.fill_ellipse(0.38, 0.56, 0.055, 0.055, kEyeColor);
      cv.fill_ellipse(0.62, 0.56, 0.055, 0.055, kEyeColor);
      cv.fill_ellipse(0.38, 0.56, 0.025, 0.025, Rgb{0.95, 0.95, 0.95});
      cv.fill_ellipse(0.62, 0.56, 0.025, 0.025, Rgb{0.95, 0.95, 0.95});
      break;  // rings
  }
}

int pick(const SyntheticSpec& spec, int64_t index, uint64_t attr_tag, int variants) {
  const RandomStream rs = RandomStream(spec.seed).derive("synth").derive(attr_tag);
  return static_cast<int>(rs.below(static_cast<uint64_t>(index), static_cast<uint64_t>(variants)));
}

}  // namespace

SynthAttributes synth_attributes(const SyntheticSpec& spec, int64_t index) {
  detail::require(index >= 0, "synth: index must be nonnegative");
  SynthAttributes a;
  a.face_shape = pick(spec, index, 1, spec.face_shapes);
  a.eye_style = pick(spec, index, 2, spec.eye_styles);
  a.hair_style = pick(spec, index, 3, spec.hair_styles);
  a.face_color = pick(spec, index, 4, spec.face_colors);
  a.hair_color = pick(spec, index, 5, spec.hair_colors);
  a.background_color = pick(spec, index, 6, spec.background_colors);
  return a;
}

Tensor synth_image(const SyntheticSpec& spec, int64_t index) {
  detail::require(spec.size >= 8, "synth: image size too small");
  const SynthAttributes a = synth_attributes(spec, index);
  Canvas cv(spec.size);
  cv.clear(kBackgroundPalette[a.background_color % 6]);
  draw_hair(cv, a.hair_style, kHairPalette[a.hair_color % 8]);
  draw_face(cv, a.face_shape, kFacePalette[a.face_color % 8]);
  draw_eyes(cv, a.eye_style);
  // mouth, shared across all variants
  cv.fill_rect(0.42, 0.72, 0.58, 0.75, Rgb{0.55, 0.15, 0.15});
  return cv.to_tensor();
}

}  // namespace gfl

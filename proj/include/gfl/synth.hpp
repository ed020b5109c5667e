#pragma once
// Procedural avatar dataset: layered colored geometric primitives controlled
// by a small attribute schema. Every image is a pure function of
// (spec, index).

#include <cstdint>

#include "gfl/tensor.hpp"

namespace gfl {

struct SyntheticSpec {
  int64_t size = 32;  // square image side
  int face_shapes = 7;
  int eye_styles = 3;
  int hair_styles = 8;
  int face_colors = 6;
  int hair_colors = 6;
  int background_colors = 5;
  uint64_t seed = 0;
};

struct SynthAttributes {
  int face_shape = 0;
  int eye_style = 0;
  int hair_style = 0;
  int face_color = 0;
  int hair_color = 0;
  int background_color = 0;
};

SynthAttributes synth_attributes(const SyntheticSpec& spec, int64_t index);

// [3 x size x size], values in [-1, 1].
Tensor synth_image(const SyntheticSpec& spec, int64_t index);

}  // namespace gfl

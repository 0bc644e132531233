#pragma once
#include <array>
#include <cstdint>
#include <utility>

#include "beetag/image.hpp"

namespace beetag {

// 12-bit marker identity in [0, 4095].
struct TagId {
  int value = 0;
};

// bit 0 is the ring segment whose angular span starts at the tag-local 0
// degree axis; indices proceed clockwise when viewed from above.
using BitVector = std::array<uint8_t, 12>;

// z_rot: in-plane orientation, radians in (-pi, pi]. y_rot/x_rot: out-of-plane
// pitch/roll. center in full-resolution pixels.
struct TagPose {
  double z_rot = 0.0;
  double y_rot = 0.0;
  double x_rot = 0.0;
  double center_x = 0.0;
  double center_y = 0.0;
};

struct TagGeometry {
  double outer_radius_px = 22.0;
  double ring_inner_radius_px = 13.0;
  double inner_circle_radius_px = 9.0;
  int segment_count = 12;
};

// wrap an angle into (-pi, pi]
double wrap_angle(double a);

// bit i = i-th most significant bit of the 12-bit expansion of id
BitVector encode_id(TagId id);

// threshold at 0.5 (ties decode as 1); returns the id and the smallest
// per-bit distance to the threshold
std::pair<TagId, double> decode_bits(const std::array<double, 12>& probs);

// (cos z, sin z, cos y, sin y, cos x, sin x)
std::array<double, 6> pose_to_unit_vectors(const TagPose& pose);

// Deterministic renderer. Ring segment i is white iff bits[i] = 1; the inner
// disc is split into a white and a black semicircle whose dividing diameter
// encodes z_rot (white half centered on the tag-local 0 degree axis); a thin
// white annulus separates ring and inner disc. Out-of-plane rotations are
// applied as an orthographic foreshortening of the disc before the in-plane
// rotation. Pixels outside the marker are mid-gray 0.5. 3x3 supersampling.
// pose.center_* are patch coordinates here (continuous, pixel p spans
// [p, p+1)); patch_size must be >= 2 * outer radius.
GrayImage rasterize_tag(const BitVector& bits, const TagPose& pose,
                        const TagGeometry& geom, int patch_size);

// rasterize_tag plus per-pixel coverage (fraction of the pixel inside the
// marker disc), used to composite tags onto frame backgrounds
void rasterize_tag_alpha(const BitVector& bits, const TagPose& pose,
                         const TagGeometry& geom, int patch_size,
                         GrayImage& value, GrayImage& alpha);

}  // namespace beetag

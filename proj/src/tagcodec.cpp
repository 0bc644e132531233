#include "beetag/tagcodec.hpp"

#include <cmath>
#include <stdexcept>

namespace beetag {

double wrap_angle(double a) {
  double r = std::remainder(a, 2.0 * M_PI);
  if (r <= -M_PI) r += 2.0 * M_PI;
  return r;
}

BitVector encode_id(TagId id) {
  if (id.value < 0 || id.value > 4095)
    throw std::invalid_argument("encode_id: id out of [0, 4095]");
  BitVector bits;
  for (int i = 0; i < 12; ++i) bits[i] = uint8_t((id.value >> (11 - i)) & 1);
  return bits;
}

std::pair<TagId, double> decode_bits(const std::array<double, 12>& probs) {
  int id = 0;
  double margin = 0.5;
  for (int i = 0; i < 12; ++i) {
    if (probs[i] >= 0.5) id |= 1 << (11 - i);
    margin = std::min(margin, std::fabs(probs[i] - 0.5));
  }
  return {TagId{id}, margin};
}

std::array<double, 6> pose_to_unit_vectors(const TagPose& pose) {
  return {std::cos(pose.z_rot), std::sin(pose.z_rot),
          std::cos(pose.y_rot), std::sin(pose.y_rot),
          std::cos(pose.x_rot), std::sin(pose.x_rot)};
}

namespace {

// Forward model: a point p on the flat tag disc appears in the image at
// R(z_rot) * A * p + center, where A = [[cos y, sin x sin y], [0, cos x]]
// is the orthographic projection of the disc rotated by x_rot then y_rot.
// Rendering inverts this map per subsample.
void raster_impl(const BitVector& bits, const TagPose& pose, const TagGeometry& geom,
                 int patch_size, GrayImage* value, GrayImage* alpha) {
  if (geom.segment_count != 12)
    throw std::invalid_argument("rasterize_tag: segment_count must be 12");
  if (!(0 < geom.inner_circle_radius_px && geom.inner_circle_radius_px < geom.ring_inner_radius_px &&
        geom.ring_inner_radius_px < geom.outer_radius_px))
    throw std::invalid_argument("rasterize_tag: radii must be strictly nested");
  if (patch_size < 2.0 * geom.outer_radius_px)
    throw std::invalid_argument("rasterize_tag: patch smaller than tag diameter");

  double z = wrap_angle(pose.z_rot);
  double cz = std::cos(z), sz = std::sin(z);
  double ca = std::cos(pose.x_rot), sa = std::sin(pose.x_rot);
  double cb = std::cos(pose.y_rot), sb = std::sin(pose.y_rot);
  double det = cb * ca;
  if (std::fabs(det) < 1e-6)
    throw std::invalid_argument("rasterize_tag: out-of-plane rotation too steep");

  double r_out2 = geom.outer_radius_px * geom.outer_radius_px;
  double r_ring2 = geom.ring_inner_radius_px * geom.ring_inner_radius_px;
  double r_inner2 = geom.inner_circle_radius_px * geom.inner_circle_radius_px;
  constexpr double seg_width = M_PI / 6.0;

  *value = GrayImage(patch_size, patch_size);
  if (alpha) *alpha = GrayImage(patch_size, patch_size);
  const double sub[3] = {1.0 / 6.0, 0.5, 5.0 / 6.0};

  for (int iy = 0; iy < patch_size; ++iy) {
    for (int ix = 0; ix < patch_size; ++ix) {
      double acc = 0.0, cover = 0.0;
      for (int jy = 0; jy < 3; ++jy) {
        double dy = iy + sub[jy] - pose.center_y;
        for (int jx = 0; jx < 3; ++jx) {
          double dx = ix + sub[jx] - pose.center_x;
          double rx = cz * dx + sz * dy;
          double ry = -sz * dx + cz * dy;
          double ux = (ca * rx - sa * sb * ry) / det;
          double uy = cb * ry / det;
          double r2 = ux * ux + uy * uy;
          if (r2 > r_out2) {
            acc += 0.5;
          } else {
            cover += 1.0;
            if (r2 > r_ring2) {
              double t = std::atan2(uy, ux);
              if (t < 0) t += 2.0 * M_PI;
              int s = int(t / seg_width);
              if (s > 11) s = 11;
              acc += bits[s] ? 1.0 : 0.0;
            } else if (r2 > r_inner2) {
              acc += 1.0;
            } else {
              acc += ux >= 0.0 ? 1.0 : 0.0;
            }
          }
        }
      }
      value->at(iy, ix) = float(acc / 9.0);
      if (alpha) alpha->at(iy, ix) = float(cover / 9.0);
    }
  }
}

}  // namespace

GrayImage rasterize_tag(const BitVector& bits, const TagPose& pose,
                        const TagGeometry& geom, int patch_size) {
  GrayImage value;
  raster_impl(bits, pose, geom, patch_size, &value, nullptr);
  return value;
}

void rasterize_tag_alpha(const BitVector& bits, const TagPose& pose,
                         const TagGeometry& geom, int patch_size,
                         GrayImage& value, GrayImage& alpha) {
  raster_impl(bits, pose, geom, patch_size, &value, &alpha);
}

}  // namespace beetag

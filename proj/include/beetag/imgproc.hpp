#pragma once
#include <string>

#include "beetag/image.hpp"

namespace beetag {

// Contrast-limited adaptive histogram equalization with bilinear blending
// between per-tile mappings. 256 bins; the clip limit is relative to the
// uniform bin height (tile_pixels / 256), clipped excess is redistributed
// uniformly. Mappings use the midpoint-CDF convention
//   m(b) = (cdf(b-1) + hist(b)/2) / n
// so a constant image maps to a constant 0.5.
GrayImage clahe(const GrayImage& img, int tile_rows, int tile_cols, double clip_limit);

// Corner-aligned bilinear resampling.
GrayImage resize_bilinear(const GrayImage& img, int out_h, int out_w);

// Fixed 4x bilinear reduction used by the detection pipeline: each output
// pixel is the mean of the central 2x2 of its 4x4 source block, i.e. the
// bilinear sample at the block center. Trailing rows/cols that do not fill
// a block are dropped.
GrayImage downsample4(const GrayImage& img);

// Separable Gaussian blur, kernel radius ceil(3*sigma), clamp-to-edge.
// sigma <= 0 returns the input unchanged.
GrayImage gaussian_blur(const GrayImage& img, double sigma);

// Each output pixel is the max over the (2r+1)^2 window, clamp-to-edge.
GrayImage max_filter(const GrayImage& img, int radius);

// Grayscale morphology with a square (2r+1)^2 structuring element.
GrayImage morph_erode(const GrayImage& img, int radius);
GrayImage morph_dilate(const GrayImage& img, int radius);
GrayImage morph_open(const GrayImage& img, int radius);
GrayImage morph_close(const GrayImage& img, int radius);

// 8-bit binary PGM (P5) frame I/O.
GrayImage read_pgm(const std::string& path);
void write_pgm(const GrayImage& img, const std::string& path);

}  // namespace beetag

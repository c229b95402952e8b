#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "psp/tensor.hpp"

namespace psp {

// Binary PPM (P6) with maxval 255. `pixels` is H*W*3 doubles in [0, 1],
// row-major, channel-interleaved; values are clamped then rounded.
void write_ppm(const std::string& path, const Array& pixels, int height, int width);
// Reads a P6 file back into the same layout (values k/255).
Array read_ppm(const std::string& path, int& height, int& width);

// Binary PGM (P5). Values are raw integers (e.g. segment labels), not
// intensities; maxval is max(255, max value) capped at 65535.
void write_pgm(const std::string& path, const std::vector<int>& values, int height, int width);
std::vector<int> read_pgm(const std::string& path, int& height, int& width);

// Grayscale dump of a weight map: min-max scaled to [0, 255].
void write_pgm_scaled(const std::string& path, const Array& values, int height, int width,
                      double& out_min, double& out_max);

// Side-by-side panel of (truth, reconstruction, |difference|) with a 2-pixel
// white separator between panels. Both inputs are H*W*3 in [0, 1]; the
// difference panel is scaled so its largest entry maps to full intensity.
void write_triptych(const std::string& path, const Array& truth, const Array& recon,
                    int height, int width);

}  // namespace psp

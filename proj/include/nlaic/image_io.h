#ifndef NLAIC_IMAGE_IO_H_
#define NLAIC_IMAGE_IO_H_

#include <string>

#include "nlaic/tensor.h"

namespace nlaic {

// Reads PNG (any color type, folded to 8-bit RGB) or binary PPM/PGM.
// Returns [3,H,W] with values in [0,1]; grayscale is replicated to RGB.
Tensor read_image(const std::string& path);

// Writes [3,H,W] as RGB or [1,H,W] as grayscale, 8-bit. Format chosen by
// extension: .png, .ppm (.pgm for grayscale).
void write_image(const std::string& path, const Tensor& img);

}  // namespace nlaic

#endif  // NLAIC_IMAGE_IO_H_

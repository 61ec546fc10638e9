#ifndef NLAIC_DATA_H_
#define NLAIC_DATA_H_

#include <array>
#include <string>
#include <vector>

#include "nlaic/rng.h"
#include "nlaic/tensor.h"

namespace nlaic {

// Sorted PNG/PPM/PGM paths in a directory.
std::vector<std::string> list_images(const std::string& dir);

// Uniform top-left offsets (row, col) for patch crops.
std::vector<std::array<int, 2>> crop_offsets(Rng& rng, int height, int width, int patch, int count);

// Seeded uniform crops from all usable images in a directory, normalized to
// [0,1]. Undersized or unreadable files are skipped with a warning; an empty
// usable set is an error. Returns [count,3,patch,patch].
Tensor crop_patches(const std::string& dir, int patch, int count, std::uint64_t seed);

// Batch helpers for [N,3,H,W] tensors.
Tensor batch_item(const Tensor& batch, int n);
Tensor stack_images(const std::vector<Tensor>& imgs);

}  // namespace nlaic

#endif  // NLAIC_DATA_H_

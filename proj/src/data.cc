#include "nlaic/data.h"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <iostream>
#include <stdexcept>

#include "nlaic/image_io.h"

namespace nlaic {

std::vector<std::string> list_images(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw std::runtime_error(dir + " is not a directory");
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string ext = e.path().extension().string();
    if (ext == ".png" || ext == ".ppm" || ext == ".pgm") out.push_back(e.path().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::array<int, 2>> crop_offsets(Rng& rng, int height, int width, int patch, int count) {
  if (height < patch || width < patch) throw std::invalid_argument("crop_offsets: image smaller than patch");
  std::vector<std::array<int, 2>> out;
  out.reserve(static_cast<size_t>(count));
  for (int k = 0; k < count; ++k) {
    const int i = static_cast<int>(rng.below(static_cast<std::uint64_t>(height - patch + 1)));
    const int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(width - patch + 1)));
    out.push_back({i, j});
  }
  return out;
}

Tensor crop_patches(const std::string& dir, int patch, int count, std::uint64_t seed) {
  if (patch < 1 || count < 1) throw std::invalid_argument("crop_patches: patch and count must be positive");
  std::vector<Tensor> images;
  for (const std::string& path : list_images(dir)) {
    try {
      Tensor img = read_image(path);
      if (img.dim(1) < patch || img.dim(2) < patch) {
        std::cerr << "warning: skipping " << path << " (" << img.dim(2) << "x" << img.dim(1) << " smaller than patch "
                  << patch << ")\n";
        continue;
      }
      images.push_back(std::move(img));
    } catch (const std::exception& e) {
      std::cerr << "warning: skipping unreadable image: " << e.what() << "\n";
    }
  }
  if (images.empty()) throw std::runtime_error("crop_patches: no usable images in " + dir);

  Rng rng(seed);
  Tensor batch({count, 3, patch, patch});
  for (int n = 0; n < count; ++n) {
    const Tensor& img = images[rng.below(images.size())];
    const int i0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(img.dim(1) - patch + 1)));
    const int j0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(img.dim(2) - patch + 1)));
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < patch; ++i)
        for (int j = 0; j < patch; ++j) batch.at4(n, c, i, j) = img.at3(c, i0 + i, j0 + j);
  }
  return batch;
}

Tensor batch_item(const Tensor& batch, int n) {
  if (batch.rank() != 4) throw std::invalid_argument("batch_item: [N,C,H,W] required");
  const int C = batch.dim(1), H = batch.dim(2), W = batch.dim(3);
  Tensor out({C, H, W});
  const std::int64_t plane = static_cast<std::int64_t>(C) * H * W;
  std::memcpy(out.data(), batch.data() + static_cast<std::int64_t>(n) * plane, sizeof(double) * static_cast<size_t>(plane));
  return out;
}

Tensor stack_images(const std::vector<Tensor>& imgs) {
  if (imgs.empty()) throw std::invalid_argument("stack_images: empty");
  const auto& s = imgs[0].shape();
  Tensor out({static_cast<int>(imgs.size()), s[0], s[1], s[2]});
  std::int64_t off = 0;
  for (const auto& im : imgs) {
    if (im.shape() != s) throw std::invalid_argument("stack_images: shape mismatch");
    std::memcpy(out.data() + off, im.data(), sizeof(double) * static_cast<size_t>(im.size()));
    off += im.size();
  }
  return out;
}

}  // namespace nlaic

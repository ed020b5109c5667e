#include "gfl/dataset.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>

#include "gfl/image_io.hpp"
#include "op_detail.hpp"

namespace gfl {

SyntheticDataset::SyntheticDataset(SyntheticSpec spec, int64_t count)
    : spec_(spec), count_(count) {
  detail::require(count_ >= 1, "synthetic dataset: count must be positive");
}

Tensor SyntheticDataset::image(int64_t index) const {
  detail::require(index >= 0 && index < count_, "synthetic dataset: index out of range");
  return synth_image(spec_, index);
}

DirectoryDataset::DirectoryDataset(const std::string& path, int64_t resolution)
    : resolution_(resolution) {
  namespace fs = std::filesystem;
  detail::require(fs::is_directory(path), "dataset: not a directory: " + path);
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(path))
    if (entry.is_regular_file()) files.push_back(entry.path().string());
  std::sort(files.begin(), files.end());
  for (const std::string& f : files) {
    auto img = read_png(f);
    if (!img) {
      ++skipped_;
      std::fprintf(stderr, "dataset: skipping undecodable file %s\n", f.c_str());
      continue;
    }
    images_.push_back(img->dim(1) == resolution_ && img->dim(2) == resolution_
                          ? std::move(*img)
                          : resize_bilinear(*img, resolution_, resolution_));
  }
  detail::require(!images_.empty(), "dataset: no decodable PNG files in " + path);
}

Tensor DirectoryDataset::image(int64_t index) const {
  detail::require(index >= 0 && index < size(), "dataset: index out of range");
  return images_[static_cast<size_t>(index)];
}

std::unique_ptr<Dataset> open_dataset(const std::string& source, int64_t resolution,
                                      uint64_t synth_seed, int64_t synth_count) {
  if (source == "synthetic") {
    SyntheticSpec spec;
    spec.size = resolution;
    spec.seed = synth_seed;
    return std::make_unique<SyntheticDataset>(spec, synth_count);
  }
  return std::make_unique<DirectoryDataset>(source, resolution);
}

BatchIterator::BatchIterator(const Dataset& data, uint64_t seed) : data_(data), seed_(seed) {
  reshuffle();
}

void BatchIterator::reshuffle() {
  order_ = shuffled_indices(data_.size(),
                            RandomStream(seed_).derive("epoch").derive(static_cast<uint64_t>(epoch_)));
  cursor_ = 0;
}

Tensor BatchIterator::next_batch(int64_t batch) {
  const int64_t r = data_.resolution();
  Tensor out({batch, 3, r, r});
  const int64_t stride = 3 * r * r;
  for (int64_t b = 0; b < batch; ++b) {
    if (cursor_ >= static_cast<int64_t>(order_.size())) {
      ++epoch_;
      reshuffle();
    }
    const Tensor img = data_.image(order_[static_cast<size_t>(cursor_++)]);
    std::memcpy(out.data() + b * stride, img.data(),
                sizeof(double) * static_cast<size_t>(stride));
  }
  return out;
}

}  // namespace gfl

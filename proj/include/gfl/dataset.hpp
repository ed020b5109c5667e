#pragma once
// Training data access: the procedural synthetic set or a directory of PNGs,
// with seed-deterministic shuffled iteration.

#include <memory>
#include <string>
#include <vector>

#include "gfl/rng.hpp"
#include "gfl/synth.hpp"
#include "gfl/tensor.hpp"

namespace gfl {

class Dataset {
 public:
  virtual ~Dataset() = default;
  virtual int64_t size() const = 0;
  virtual int64_t resolution() const = 0;
  virtual Tensor image(int64_t index) const = 0;  // [3,R,R] in [-1,1]
};

class SyntheticDataset : public Dataset {
 public:
  SyntheticDataset(SyntheticSpec spec, int64_t count);
  int64_t size() const override { return count_; }
  int64_t resolution() const override { return spec_.size; }
  Tensor image(int64_t index) const override;
  const SyntheticSpec& spec() const { return spec_; }

 private:
  SyntheticSpec spec_;
  int64_t count_;
};

class DirectoryDataset : public Dataset {
 public:
  // Decodes every PNG under path (sorted by filename), resizes to the target
  // resolution. Undecodable files are counted and skipped; an empty result is
  // an error.
  DirectoryDataset(const std::string& path, int64_t resolution);
  int64_t size() const override { return static_cast<int64_t>(images_.size()); }
  int64_t resolution() const override { return resolution_; }
  Tensor image(int64_t index) const override;
  int64_t skipped() const { return skipped_; }

 private:
  int64_t resolution_;
  int64_t skipped_ = 0;
  std::vector<Tensor> images_;
};

// "synthetic" or a directory path.
std::unique_ptr<Dataset> open_dataset(const std::string& source, int64_t resolution,
                                      uint64_t synth_seed, int64_t synth_count);

// Epoch-shuffled deterministic batch stream over a dataset.
class BatchIterator {
 public:
  BatchIterator(const Dataset& data, uint64_t seed);
  Tensor next_batch(int64_t batch);  // [B,3,R,R]

 private:
  const Dataset& data_;
  uint64_t seed_;
  int64_t epoch_ = 0;
  int64_t cursor_ = 0;
  std::vector<int64_t> order_;

  void reshuffle();
};

}  // namespace gfl

#pragma once

#include <optional>
#include <vector>

#include "gsfm/tensor.hpp"

namespace gsfm {

// A[i,j] = -||q_i - k_j||^2 over columns of KQ [C_k, M] and KM [C_k, N],
// computed via the -|q|^2 + 2 q.k - |k|^2 expansion
template <class T>
Tensor<T> affinity(const Tensor<T>& kq, const Tensor<T>& km);

// Per query row keep the k largest affinities (ties to the lowest memory
// index), softmax over the kept entries, zeros elsewhere. k >= N degenerates
// to a full softmax row. Gradients flow only through kept entries.
template <class T>
Tensor<T> topk_normalize(const Tensor<T>& a, std::size_t k);

// out[:,i] = sum_j W[i,j] * VM[:,j]
template <class T>
Tensor<T> readout(const Tensor<T>& w, const Tensor<T>& vm);

// Accumulated keys/values over memorized frames. One bank per video
// sequence; single writer. Frame 0 is always kept.
template <class T>
class MemoryBank {
 public:
  explicit MemoryBank(std::optional<std::size_t> capacity_frames = std::nullopt)
      : capacity_(capacity_frames) {}

  bool empty() const { return frames_.empty(); }
  std::size_t frame_count() const { return frames_.size(); }
  std::size_t location_count() const;
  const std::vector<int>& frame_indices() const { return indices_; }

  // concatenated along the location axis, in insertion order
  Tensor<T> keys() const;
  Tensor<T> values() const;

  void insert(int frame_id, const Tensor<T>& key_flat, const Tensor<T>& value_flat);

 private:
  struct Entry {
    Tensor<T> key;    // [C_k, n]
    Tensor<T> value;  // [C_v, n]
  };
  std::vector<Entry> frames_;
  std::vector<int> indices_;
  std::optional<std::size_t> capacity_;
};

// Inserts iff frame_id is a multiple of every_r (frame 0 therefore always
// memorized); the frame's query keys are reused verbatim as memory keys.
template <class T>
bool memorize(MemoryBank<T>& bank, int frame_id, const Tensor<T>& key_flat,
              const Tensor<T>& value_flat, int every_r);

}  // namespace gsfm

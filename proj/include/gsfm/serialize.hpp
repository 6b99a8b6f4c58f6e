#pragma once

#include <string>

#include "gsfm/tensor.hpp"

namespace gsfm {

// Checkpoint tensor format: flat little-endian float32 next to a JSON sidecar
// {"shape": [...], "dtype": "float32"}. Writes <path_base>.bin + <path_base>.json.
template <class T>
void save_tensor(const std::string& path_base, const Tensor<T>& t);
template <class T>
Tensor<T> load_tensor(const std::string& path_base);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace gsfm

#include "gsfm/serialize.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace gsfm {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << content;
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

template <class T>
void save_tensor(const std::string& path_base, const Tensor<T>& t) {
  std::vector<float> buf(t.numel());
  for (std::size_t i = 0; i < buf.size(); ++i)
    buf[i] = static_cast<float>(t.data()[i]);
  std::ofstream f(path_base + ".bin", std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path_base + ".bin");
  f.write(reinterpret_cast<const char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));

  nlohmann::json sidecar;
  sidecar["shape"] = t.shape();
  sidecar["dtype"] = "float32";
  write_text_file(path_base + ".json", sidecar.dump());
}

template <class T>
Tensor<T> load_tensor(const std::string& path_base) {
  nlohmann::json sidecar = nlohmann::json::parse(read_text_file(path_base + ".json"));
  if (sidecar.at("dtype").get<std::string>() != "float32")
    throw std::runtime_error("unsupported dtype in " + path_base + ".json");
  Shape shape = sidecar.at("shape").get<Shape>();

  std::ifstream f(path_base + ".bin", std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path_base + ".bin");
  std::vector<float> buf(shape_numel(shape));
  f.read(reinterpret_cast<char*>(buf.data()),
         static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (static_cast<std::size_t>(f.gcount()) != buf.size() * sizeof(float))
    throw std::runtime_error("truncated tensor file " + path_base + ".bin");

  std::vector<T> data(buf.size());
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<T>(buf[i]);
  return Tensor<T>(std::move(shape), std::move(data));
}

template void save_tensor<float>(const std::string&, const Tensor<float>&);
template void save_tensor<double>(const std::string&, const Tensor<double>&);
template Tensor<float> load_tensor<float>(const std::string&);
template Tensor<double> load_tensor<double>(const std::string&);

}  // namespace gsfm

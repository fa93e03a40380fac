#include "sta/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace sta {
namespace {

static_assert(std::endian::native == std::endian::little,
              "tensor container assumes a little-endian host");

void put_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), 4);
}

std::uint32_t get_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  return v;
}

template <typename S>
void write_impl(std::ostream& os, const Tensor<S>& t, std::uint8_t dtype) {
  os.write("STAT", 4);
  os.put(static_cast<char>(dtype));
  if (t.rank() > 255) throw ValidationError("tensor rank exceeds container limit");
  os.put(static_cast<char>(t.rank()));
  for (std::size_t e : t.shape()) {
    if (e > 0xffffffffull) throw ValidationError("tensor extent exceeds container limit");
    put_u32(os, static_cast<std::uint32_t>(e));
  }
  os.write(reinterpret_cast<const char*>(t.data().data()),
           static_cast<std::streamsize>(t.numel() * sizeof(S)));
  if (!os) throw ValidationError("tensor write failed");
}

template <typename S>
Tensor<S> read_impl(std::istream& is, std::uint8_t want_dtype) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "STAT", 4) != 0)
    throw ValidationError("bad tensor container: missing STAT magic");
  const int dtype = is.get();
  const int rank = is.get();
  if (dtype != want_dtype)
    throw ValidationError("tensor container dtype " + std::to_string(dtype) +
                          " does not match expected " + std::to_string(int(want_dtype)));
  if (rank < 0) throw ValidationError("truncated tensor container");
  Shape shape(static_cast<std::size_t>(rank));
  for (auto& e : shape) e = get_u32(is);
  std::vector<S> data(shape_numel(shape));
  is.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(data.size() * sizeof(S)));
  if (!is) throw ValidationError("truncated tensor container");
  return Tensor<S>::from_data(std::move(shape), std::move(data));
}

}  // namespace

void write_tensor(std::ostream& os, const TensorF& t) { write_impl(os, t, 0); }
void write_tensor(std::ostream& os, const TensorD& t) { write_impl(os, t, 1); }
TensorF read_tensor_f32(std::istream& is) { return read_impl<float>(is, 0); }
TensorD read_tensor_f64(std::istream& is) { return read_impl<double>(is, 1); }

void save_tensor(const std::string& path, const TensorF& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ValidationError("cannot open " + path + " for writing");
  write_tensor(os, t);
}

TensorF load_tensor_f32(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open " + path);
  return read_tensor_f32(is);
}

}  // namespace sta

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "sta/tensor.hpp"

// Binary tensor container. Layout, all little-endian:
//   bytes 0..3   magic "STAT"
//   byte  4      dtype: 0 = f32, 1 = f64
//   byte  5      rank
//   next rank*4  extents as u32
//   rest         payload, row-major
namespace sta {

void write_tensor(std::ostream& os, const TensorF& t);
void write_tensor(std::ostream& os, const TensorD& t);
TensorF read_tensor_f32(std::istream& is);
TensorD read_tensor_f64(std::istream& is);

void save_tensor(const std::string& path, const TensorF& t);
TensorF load_tensor_f32(const std::string& path);

}  // namespace sta

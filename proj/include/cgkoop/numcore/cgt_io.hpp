#pragma once

#include <filesystem>
#include <iosfwd>

#include "cgkoop/numcore/tensor.hpp"

namespace cgkoop::num {

// CGT1 layout: "CGT1", u32 LE rank, rank x u64 LE dims, row-major f64 LE payload.

void write_cgt(std::ostream& os, const Tensor& t);
Tensor read_cgt(std::istream& is);
void write_cgt(const std::filesystem::path& path, const Tensor& t);
Tensor read_cgt(const std::filesystem::path& path);

}  // namespace cgkoop::num

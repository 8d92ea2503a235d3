#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "sed/tensor.hpp"

namespace sed {

std::uint32_t crc32(const unsigned char* data, std::size_t len, std::uint32_t seed = 0);

void write_u32(std::ostream& os, std::uint32_t v);
void write_u64(std::ostream& os, std::uint64_t v);
std::uint32_t read_u32(std::istream& is, const char* what);
std::uint64_t read_u64(std::istream& is, const char* what);

void read_exact(std::istream& is, char* buf, std::size_t len, const char* what);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace sed

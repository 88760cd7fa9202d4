#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "mmseq/quantizer.hpp"

namespace mmseq {

// Line-oriented codebook file:
//
//   # codebook p=<p> k=<k> [r=<r> eps=<eps>]
//   <c_1,1> <c_1,2> ... <c_1,p>
//   ...
//
// Floats are written in shortest round-trip form, so read(write(c)) == c
// bit for bit. r/eps are present for covering quantizers.
struct CodebookFile {
  Codebook codebook;
  std::optional<double> radius;
  std::optional<double> eps;

  bool is_covering() const noexcept { return radius.has_value(); }
  CoveringQuantizer covering() const;
};

void write_codebook(std::ostream& os, const Codebook& codebook);
void write_codebook(std::ostream& os, const CoveringQuantizer& cq);
CodebookFile read_codebook(std::istream& is);

void save_codebook(const std::filesystem::path& path, const Codebook& codebook);
void save_codebook(const std::filesystem::path& path, const CoveringQuantizer& cq);
CodebookFile load_codebook(const std::filesystem::path& path);

// Shortest decimal string that parses back to exactly `v`.
std::string format_double(double v);
// Strict full-string parse; throws InvalidInputError on trailing garbage.
double parse_double(std::string_view text);

}  // namespace mmseq

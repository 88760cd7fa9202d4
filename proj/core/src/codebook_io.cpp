#include "mmseq/codebook_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include "mmseq/errors.hpp"

namespace mmseq {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
  if (text == "nan") return std::nan("");
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (!text.empty() && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) {
    throw InvalidInputError("not a number: '" + std::string(text) + "'");
  }
  return v;
}

CoveringQuantizer CodebookFile::covering() const {
  if (!radius || !eps) throw InvalidInputError("codebook file has no covering radius");
  return CoveringQuantizer(codebook, *radius, *eps);
}

namespace {

void write_points(std::ostream& os, const Codebook& c) {
  for (std::size_t j = 0; j < c.size(); ++j) {
    const auto pt = c.point(j);
    for (std::size_t i = 0; i < pt.size(); ++i) os << (i ? " " : "") << format_double(pt[i]);
    os << '\n';
  }
}

}  // namespace

void write_codebook(std::ostream& os, const Codebook& codebook) {
  os << "# codebook p=" << codebook.dim() << " k=" << codebook.size() << '\n';
  write_points(os, codebook);
}

void write_codebook(std::ostream& os, const CoveringQuantizer& cq) {
  os << "# codebook p=" << cq.dim() << " k=" << cq.centers().size()
     << " r=" << format_double(cq.radius()) << " eps=" << format_double(cq.eps()) << '\n';
  write_points(os, cq.centers());
}

CodebookFile read_codebook(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw IoError("codebook file is empty");
  std::istringstream header(line);
  std::string hash, tag;
  header >> hash >> tag;
  if (hash != "#" || tag != "codebook") throw IoError("missing '# codebook' header");
  std::optional<std::size_t> p, k;
  std::optional<double> r, eps;
  std::string field;
  while (header >> field) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) throw IoError("malformed header field '" + field + "'");
    const std::string key = field.substr(0, eq);
    const std::string value = field.substr(eq + 1);
    try {
      if (key == "p") p = static_cast<std::size_t>(std::stoull(value));
      else if (key == "k") k = static_cast<std::size_t>(std::stoull(value));
      else if (key == "r") r = parse_double(value);
      else if (key == "eps") eps = parse_double(value);
      else throw IoError("unknown header field '" + key + "'");
    } catch (const std::logic_error&) {
      throw IoError("bad header value '" + field + "'");
    }
  }
  if (!p || !k || *p == 0 || *k == 0) throw IoError("header needs p >= 1 and k >= 1");
  if (r.has_value() != eps.has_value()) throw IoError("header needs both r and eps or neither");

  std::vector<double> coords;
  coords.reserve(*p * *k);
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string tok;
    std::size_t cols = 0;
    while (row >> tok) {
      coords.push_back(parse_double(tok));
      ++cols;
    }
    if (cols != *p) throw IoError("codebook row " + std::to_string(rows + 1) + " has " +
                                  std::to_string(cols) + " coordinates, expected " + std::to_string(*p));
    ++rows;
  }
  if (rows != *k) throw IoError("codebook has " + std::to_string(rows) + " points, header says " +
                                std::to_string(*k));
  bool sorted = *p == 1;
  for (std::size_t j = 1; sorted && j < coords.size(); ++j) sorted = coords[j] > coords[j - 1];
  Codebook cb = sorted ? Codebook::scalar(std::move(coords)) : Codebook(*p, std::move(coords));
  return CodebookFile{std::move(cb), r, eps};
}

void save_codebook(const std::filesystem::path& path, const Codebook& codebook) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  write_codebook(os, codebook);
}

void save_codebook(const std::filesystem::path& path, const CoveringQuantizer& cq) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  write_codebook(os, cq);
}

CodebookFile load_codebook(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  return read_codebook(is);
}

}  // namespace mmseq

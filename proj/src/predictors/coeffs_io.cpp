#include <string>

#include "tpeq/errors.hpp"
#include "tpeq/predictors.hpp"
#include "tpeq/text.hpp"

namespace tpeq {

namespace {
constexpr std::string_view kHeader = "tpeq-coeffs v1";
}

std::string serialize_coefficients(const PredictorCoefficients& coeffs) {
  std::string out(kHeader);
  out += "\nconfigs " + std::to_string(coeffs.n_configs()) + "\n";
  for (int j = 1; j <= coeffs.n_configs(); ++j) {
    for (int k = 1; k <= coeffs.n_configs(); ++k) {
      if (!coeffs.has_alpha(j, k)) continue;
      out += "alpha " + std::to_string(j) + " " + std::to_string(k);
      for (const double a : coeffs.alpha(j, k)) out += " " + text::format_real(a);
      out += "\n";
    }
  }
  for (int j = 1; j <= coeffs.n_configs(); ++j) {
    if (!coeffs.has_beta(j)) continue;
    out += "beta " + std::to_string(j);
    for (const double b : coeffs.beta(j)) out += " " + text::format_real(b);
    out += "\n";
  }
  return out;
}

PredictorCoefficients parse_coefficients(std::string_view content) {
  PredictorCoefficients out;
  bool have_header = false;
  bool have_size = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    const auto eol = content.find('\n', pos);
    const auto end = eol == std::string_view::npos ? content.size() : eol;
    const std::string_view line = text::trim(content.substr(pos, end - pos));
    pos = end == content.size() ? end : end + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    if (!have_header) {
      if (line != kHeader) throw ParseError("missing '" + std::string(kHeader) + "' header", line_no);
      have_header = true;
      continue;
    }
    const auto tok = text::split_ws(line);
    if (!have_size) {
      if (tok.size() != 2 || tok[0] != "configs") throw ParseError("expected 'configs <count>'", line_no);
      const auto n = text::parse_int(tok[1], line_no);
      if (n < 1 || n > 1000) throw ParseError("configuration count out of range", line_no);
      out = PredictorCoefficients(static_cast<int>(n));
      have_size = true;
      continue;
    }
    auto config = [&](std::string_view t) {
      const auto c = text::parse_int(t, line_no);
      if (c < 1 || c > out.n_configs()) throw ParseError("configuration index out of range", line_no);
      return static_cast<int>(c);
    };
    if (tok[0] == "alpha") {
      if (tok.size() != 7) throw ParseError("alpha needs two indices and four coefficients", line_no);
      const int j = config(tok[1]);
      const int k = config(tok[2]);
      if (out.has_alpha(j, k)) throw ParseError("duplicate alpha entry", line_no);
      PredictorCoefficients::Alpha a{};
      for (std::size_t i = 0; i < 4; ++i) a[i] = text::parse_real(tok[3 + i], line_no);
      out.set_alpha(j, k, a);
    } else if (tok[0] == "beta") {
      if (tok.size() != 5) throw ParseError("beta needs an index and three coefficients", line_no);
      const int j = config(tok[1]);
      if (out.has_beta(j)) throw ParseError("duplicate beta entry", line_no);
      PredictorCoefficients::Beta b{};
      for (std::size_t i = 0; i < 3; ++i) b[i] = text::parse_real(tok[2 + i], line_no);
      out.set_beta(j, b);
    } else {
      throw ParseError("unknown record '" + std::string(tok[0]) + "'", line_no);
    }
  }
  if (!have_header || !have_size) throw ParseError("truncated coefficient file", line_no + 1);
  return out;
}

PredictorCoefficients load_coefficients(const std::string& path) {
  try {
    return parse_coefficients(text::read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what(), 0);
  }
}

void save_coefficients(const PredictorCoefficients& coeffs, const std::string& path) {
  text::write_file_atomic(path, serialize_coefficients(coeffs));
}

}  // namespace tpeq

#include "dem/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dem/errors.hpp"

namespace dem {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

double parse_double(const std::string& s, const std::string& context) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError("could not parse number '" + s + "' in " + context);
  }
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

Dataset dataset_from_sample(const SimSetting& setting, const SimSample& sample) {
  Dataset d;
  d.x = sample.x;
  d.combo_idx = sample.combo_idx;
  d.y = sample.y;
  d.space = setting.space;
  return d;
}

void write_dataset_csv(const std::string& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  for (int j = 0; j < data.p(); ++j) out << "x" << (j + 1) << ",";
  out << "combo,y\n";
  for (int i = 0; i < data.n(); ++i) {
    for (int j = 0; j < data.p(); ++j) out << fmt(data.x(i, j)) << ",";
    out << data.space.mask(data.combo_idx[i]) << "," << fmt(data.y[i]) << "\n";
  }
  if (!out) throw IoError("failed while writing " + path);
}

Dataset read_dataset_csv(const std::string& path, const TreatmentSpace* space) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);

  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_csv_line(line);

  // Expect x1..xp in order, then `combo`, then `y`.
  int p = 0;
  while (p < static_cast<int>(header.size()) &&
         header[p] == "x" + std::to_string(p + 1)) {
    ++p;
  }
  if (p == 0) throw DataError(path + ": missing covariate column 'x1'");
  if (p >= static_cast<int>(header.size()) || header[p] != "combo") {
    throw DataError(path + ": missing treatment column 'combo'");
  }
  if (p + 1 >= static_cast<int>(header.size()) || header[p + 1] != "y") {
    throw DataError(path + ": missing outcome column 'y'");
  }
  if (p + 2 != static_cast<int>(header.size())) {
    throw DataError(path + ": unexpected column '" + header[p + 2] + "'");
  }

  std::vector<Vec> rows;
  std::vector<std::uint32_t> masks;
  Vec ys;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (static_cast<int>(fields.size()) != p + 2) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": expected " + std::to_string(p + 2) + " fields");
    }
    const std::string ctx = path + ":" + std::to_string(line_no);
    Vec row(p);
    for (int j = 0; j < p; ++j) row[j] = parse_double(fields[j], ctx);
    const double mask_val = parse_double(fields[p], ctx);
    if (mask_val < 0 || mask_val != std::floor(mask_val) || mask_val >= (1u << 20)) {
      throw DataError(ctx + ": combo must be a bitmask integer in [0, 2^20)");
    }
    rows.push_back(std::move(row));
    masks.push_back(static_cast<std::uint32_t>(mask_val));
    ys.push_back(parse_double(fields[p + 1], ctx));
  }
  if (rows.empty()) throw DataError(path + ": no data rows");

  Dataset d;
  if (space != nullptr) {
    d.space = *space;
  } else {
    std::vector<std::uint32_t> distinct = masks;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    std::uint32_t all_bits = 0;
    for (std::uint32_t m : distinct) all_bits |= m;
    int k = 1;
    while ((1u << k) <= all_bits) ++k;
    d.space = TreatmentSpace(k, distinct);
  }

  d.x = Mat(static_cast<int>(rows.size()), p);
  d.y = std::move(ys);
  d.combo_idx.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy(rows[i].begin(), rows[i].end(), d.x.row(static_cast<int>(i)));
    d.combo_idx[i] = d.space.index_of(masks[i]);  // DomainError if inadmissible
  }
  return d;
}

Mat read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  std::vector<Vec> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_csv_line(line);
    Vec row;
    row.reserve(fields.size());
    bool numeric = true;
    for (const std::string& f : fields) {
      try {
        std::size_t pos = 0;
        row.push_back(std::stod(f, &pos));
        if (pos != f.size()) numeric = false;
      } catch (const std::exception&) {
        numeric = false;
      }
      if (!numeric) break;
    }
    if (!numeric) {
      if (line_no == 1) continue;  // header row
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": non-numeric field");
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": ragged row");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(path + ": no numeric rows");
  Mat m(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy(rows[i].begin(), rows[i].end(), m.row(static_cast<int>(i)));
  }
  return m;
}

void write_matrix_csv(const std::string& path, const Mat& m,
                      const std::vector<std::string>& header) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  if (!header.empty()) {
    for (std::size_t j = 0; j < header.size(); ++j) {
      out << header[j] << (j + 1 < header.size() ? "," : "\n");
    }
  }
  for (int i = 0; i < m.rows; ++i) {
    for (int j = 0; j < m.cols; ++j) {
      out << fmt(m(i, j)) << (j + 1 < m.cols ? "," : "\n");
    }
  }
  if (!out) throw IoError("failed while writing " + path);
}

}  // namespace dem

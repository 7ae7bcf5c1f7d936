#pragma once

#include <string>
#include <vector>

#include "dem/matrix.hpp"
#include "dem/simdata.hpp"
#include "dem/treatment.hpp"

namespace dem {

// Rows of (covariates, assigned combination, outcome) plus the admissible
// treatment set they are drawn from.
struct Dataset {
  Mat x;
  std::vector<int> combo_idx;
  Vec y;
  TreatmentSpace space;

  int n() const { return x.rows; }
  int p() const { return x.cols; }
};

Dataset dataset_from_sample(const SimSetting& setting, const SimSample& sample);

// CSV schema: header row `x1,...,xp,combo,y`; `combo` is the combination's
// bitmask. Missing or misnamed columns raise DataError naming the column.
void write_dataset_csv(const std::string& path, const Dataset& data);

// With a null space the admissible set is inferred from the distinct observed
// bitmasks (ascending) and K from the highest active bit.
Dataset read_dataset_csv(const std::string& path,
                         const TreatmentSpace* space = nullptr);

// Plain numeric matrix CSV (header row ignored if non-numeric).
Mat read_matrix_csv(const std::string& path);
void write_matrix_csv(const std::string& path, const Mat& m,
                      const std::vector<std::string>& header = {});

}  // namespace dem

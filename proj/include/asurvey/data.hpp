#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace asurvey {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using MaskMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

enum class QuestionKind { ordinal, binary, one_hot_derived };

std::string_view to_string(QuestionKind kind);
QuestionKind parse_question_kind(std::string_view text);

struct QuestionMeta {
  std::string id;
  int num_categories = 2;
  QuestionKind kind = QuestionKind::ordinal;
  std::string source_column;
  // Display fields carried to the session service; both optional.
  std::string text;
  std::vector<std::string> labels;
};

// How the numbers in ResponseMatrix::values are to be read.
//   categorical: integers 1..M_j (ordinal pipeline)
//   scaled:      linear image of the categories in [-1, 1] (Gaussian pipeline)
//   real:        unbounded reals, e.g. synthetic Gaussian data
enum class ResponseScale { categorical, scaled, real };

struct ResponseMatrix {
  Matrix values;
  MaskMatrix mask;
  std::vector<QuestionMeta> questions;
  ResponseScale scale = ResponseScale::categorical;

  [[nodiscard]] Eigen::Index rows() const { return values.rows(); }
  [[nodiscard]] Eigen::Index cols() const { return values.cols(); }
  [[nodiscard]] bool observed(Eigen::Index i, Eigen::Index j) const { return mask(i, j); }
  [[nodiscard]] std::size_t observed_count() const;
  [[nodiscard]] int question_index(std::string_view id) const;  // -1 when absent

  // Rows selected in the given order.
  [[nodiscard]] ResponseMatrix select_rows(const std::vector<int>& rows) const;
  // Throws std::invalid_argument on shape mismatches, duplicate ids or
  // out-of-range categorical values.
  void validate() const;
};

// Schema rows: id, num_categories, kind, optional text and '|'-separated labels.
std::vector<QuestionMeta> load_schema(const std::filesystem::path& path);
void save_schema(const std::filesystem::path& path, const std::vector<QuestionMeta>& schema);

// Reads a CSV of respondents x questions. Empty, unparseable or out-of-range
// cells become unobserved. Categorical by default; `real` keeps any finite
// number.
ResponseMatrix load_dataset(const std::filesystem::path& path, const std::vector<QuestionMeta>& schema,
                            ResponseScale scale = ResponseScale::categorical);
void save_dataset(const std::filesystem::path& path, const ResponseMatrix& data);

double scale_category(int category, int num_categories);
int unscale_category(double scaled, int num_categories);

// Maps category m of question j to 2(m-1)/(M_j-1) - 1.
ResponseMatrix rescale_responses(const ResponseMatrix& raw);

// C binary columns (categories {1,2}) for one categorical column with C levels.
ResponseMatrix one_hot_encode(const ResponseMatrix& data, std::string_view question_id);
// The input with `question_id` replaced in place by its indicator columns.
ResponseMatrix replace_with_one_hot(const ResponseMatrix& data, std::string_view question_id);

struct SparseHoldout {
  double fraction = 0.2;
};
struct LooHoldout {
  int question = 0;
};
struct KFoldHoldout {
  int folds = 5;
  int fold_index = 0;
};
struct NoHoldout {};
using HoldoutSpec = std::variant<SparseHoldout, LooHoldout, KFoldHoldout, NoHoldout>;

struct SplitSpec {
  std::uint64_t seed = 0;
  double train_fraction = 0.5;
  HoldoutSpec holdout = SparseHoldout{};

  void validate() const;
};

struct SplitResult {
  ResponseMatrix train;
  ResponseMatrix sim;
  MaskMatrix holdout;            // over sim; true = evaluation target
  std::vector<int> train_rows;   // indices into the source matrix
  std::vector<int> sim_rows;
  std::vector<int> heldout_questions;  // columns removed entirely (loocv / kfold)

  // Entries a strategy may reveal: observed and not held out.
  [[nodiscard]] MaskMatrix available() const { return sim.mask && !holdout; }
};

SplitResult split_and_holdout(const ResponseMatrix& data, const SplitSpec& spec);

// Question indices belonging to `fold_index` of a seeded k-fold partition.
std::vector<int> question_fold(int num_questions, int folds, int fold_index, std::uint64_t seed);

}  // namespace asurvey

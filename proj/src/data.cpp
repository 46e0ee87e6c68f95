#include "asurvey/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include "asurvey/csv.hpp"

namespace asurvey {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return std::string(s.substr(first, last - first + 1));
}

bool parse_int(std::string_view text, int& out) {
  const std::string t = trim(text);
  if (t.empty()) return false;
  const char* begin = t.data();
  const char* end = t.data() + t.size();
  if (*begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, out);
  if (ec == std::errc{} && ptr == end) return true;
  // Accept integral floats such as "3.0".
  double d = 0;
  auto [p2, ec2] = std::from_chars(begin, end, d);
  if (ec2 != std::errc{} || p2 != end || d != std::floor(d) || std::abs(d) > 1e9) return false;
  out = static_cast<int>(d);
  return true;
}

std::vector<std::string> split_labels(std::string_view text) {
  std::vector<std::string> labels;
  if (trim(text).empty()) return labels;
  std::size_t start = 0;
  while (true) {
    const auto bar = text.find('|', start);
    labels.push_back(trim(text.substr(start, bar - start)));
    if (bar == std::string_view::npos) break;
    start = bar + 1;
  }
  return labels;
}

}  // namespace

std::string_view to_string(QuestionKind kind) {
  switch (kind) {
    case QuestionKind::ordinal: return "ordinal";
    case QuestionKind::binary: return "binary";
    case QuestionKind::one_hot_derived: return "one-hot-derived";
  }
  return "ordinal";
}

QuestionKind parse_question_kind(std::string_view text) {
  const std::string t = trim(text);
  if (t == "ordinal") return QuestionKind::ordinal;
  if (t == "binary") return QuestionKind::binary;
  if (t == "one-hot-derived" || t == "one_hot_derived") return QuestionKind::one_hot_derived;
  throw std::invalid_argument("unknown question kind: " + t);
}

std::size_t ResponseMatrix::observed_count() const {
  return static_cast<std::size_t>(mask.count());
}

int ResponseMatrix::question_index(std::string_view id) const {
  for (std::size_t j = 0; j < questions.size(); ++j)
    if (questions[j].id == id) return static_cast<int>(j);
  return -1;
}

ResponseMatrix ResponseMatrix::select_rows(const std::vector<int>& rows) const {
  ResponseMatrix out;
  out.questions = questions;
  out.scale = scale;
  out.values.resize(static_cast<Eigen::Index>(rows.size()), cols());
  out.mask.resize(static_cast<Eigen::Index>(rows.size()), cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.values.row(static_cast<Eigen::Index>(r)) = values.row(rows[r]);
    out.mask.row(static_cast<Eigen::Index>(r)) = mask.row(rows[r]);
  }
  return out;
}

void ResponseMatrix::validate() const {
  if (values.rows() != mask.rows() || values.cols() != mask.cols())
    throw std::invalid_argument("values and mask shapes differ");
  if (static_cast<Eigen::Index>(questions.size()) != values.cols())
    throw std::invalid_argument("question metadata does not match column count");
  std::set<std::string> ids;
  for (const auto& q : questions) {
    if (q.num_categories < 2) throw std::invalid_argument("question " + q.id + " has fewer than 2 categories");
    if (!ids.insert(q.id).second) throw std::invalid_argument("duplicate question id: " + q.id);
  }
  for (Eigen::Index j = 0; j < cols(); ++j) {
    const int m = questions[static_cast<std::size_t>(j)].num_categories;
    for (Eigen::Index i = 0; i < rows(); ++i) {
      if (!mask(i, j)) continue;
      const double v = values(i, j);
      if (!std::isfinite(v)) throw std::invalid_argument("non-finite observed value");
      if (scale == ResponseScale::categorical && (v != std::floor(v) || v < 1 || v > m))
        throw std::invalid_argument("categorical value out of range in column " + questions[static_cast<std::size_t>(j)].id);
      if (scale == ResponseScale::scaled && (v < -1.0 || v > 1.0))
        throw std::invalid_argument("scaled value outside [-1,1] in column " + questions[static_cast<std::size_t>(j)].id);
    }
  }
}

std::vector<QuestionMeta> load_schema(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw std::runtime_error("missing schema file: " + path.string());
  const auto rows = csv::read_file(path);
  std::vector<QuestionMeta> schema;
  std::set<std::string> ids;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.empty() || (row.size() == 1 && trim(row[0]).empty())) continue;
    if (r == 0 && trim(row[0]) == "id") continue;  // header
    if (row.size() < 3) throw std::invalid_argument("schema row needs id, num_categories, kind");
    QuestionMeta q;
    q.id = trim(row[0]);
    if (!parse_int(row[1], q.num_categories) || q.num_categories < 2)
      throw std::invalid_argument("schema: question " + q.id + " needs num_categories >= 2");
    q.kind = parse_question_kind(row[2]);
    q.source_column = q.id;
    if (row.size() > 3) q.text = row[3];
    if (row.size() > 4) q.labels = split_labels(row[4]);
    if (!ids.insert(q.id).second) throw std::invalid_argument("schema: duplicate question id " + q.id);
    schema.push_back(std::move(q));
  }
  if (schema.empty()) throw std::invalid_argument("schema has no questions");
  return schema;
}

void save_schema(const std::filesystem::path& path, const std::vector<QuestionMeta>& schema) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write schema: " + path.string());
  csv::write_row(out, {"id", "num_categories", "kind", "text", "labels"});
  for (const auto& q : schema) {
    std::string labels;
    for (std::size_t i = 0; i < q.labels.size(); ++i) labels += (i ? "|" : "") + q.labels[i];
    csv::write_row(out, {q.id, std::to_string(q.num_categories), std::string(to_string(q.kind)), q.text, labels});
  }
}

ResponseMatrix load_dataset(const std::filesystem::path& path, const std::vector<QuestionMeta>& schema, ResponseScale scale) {
  if (scale == ResponseScale::scaled) throw std::invalid_argument("datasets load as categorical or real");
  if (!std::filesystem::exists(path)) throw std::runtime_error("missing data file: " + path.string());
  const auto rows = csv::read_file(path);
  if (rows.size() < 2) throw std::invalid_argument("zero usable rows in " + path.string());

  std::unordered_map<std::string, std::size_t> header;
  for (std::size_t c = 0; c < rows[0].size(); ++c) header[trim(rows[0][c])] = c;

  std::vector<std::size_t> source(schema.size());
  for (std::size_t j = 0; j < schema.size(); ++j) {
    const std::string& col = schema[j].source_column.empty() ? schema[j].id : schema[j].source_column;
    auto it = header.find(col);
    if (it == header.end()) throw std::invalid_argument("schema column not found in data: " + col);
    source[j] = it->second;
  }

  std::vector<std::vector<double>> values;
  std::vector<std::vector<bool>> observed;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    std::vector<double> v(schema.size(), 0.0);
    std::vector<bool> o(schema.size(), false);
    bool any = false;
    for (std::size_t j = 0; j < schema.size(); ++j) {
      if (source[j] >= row.size()) continue;
      if (scale == ResponseScale::real) {
        const std::string cell = trim(row[source[j]]);
        double x = 0.0;
        const auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), x);
        if (!cell.empty() && ec == std::errc() && end == cell.data() + cell.size() && std::isfinite(x)) {
          v[j] = x;
          o[j] = true;
          any = true;
        }
        continue;
      }
      int category = 0;
      if (parse_int(row[source[j]], category) && category >= 1 && category <= schema[j].num_categories) {
        v[j] = category;
        o[j] = true;
        any = true;
      }
    }
    if (!any) continue;
    values.push_back(std::move(v));
    observed.push_back(std::move(o));
  }
  if (values.empty()) throw std::invalid_argument("zero usable rows in " + path.string());

  ResponseMatrix out;
  out.questions = schema;
  out.scale = scale;
  const auto n = static_cast<Eigen::Index>(values.size());
  const auto k = static_cast<Eigen::Index>(schema.size());
  out.values = Matrix::Zero(n, k);
  out.mask = MaskMatrix::Constant(n, k, false);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < k; ++j) {
      out.values(i, j) = values[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      out.mask(i, j) = observed[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  return out;
}

void save_dataset(const std::filesystem::path& path, const ResponseMatrix& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write data: " + path.string());
  csv::Row header;
  for (const auto& q : data.questions) header.push_back(q.id);
  csv::write_row(out, header);
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    csv::Row row;
    for (Eigen::Index j = 0; j < data.cols(); ++j) {
      if (!data.mask(i, j)) {
        row.emplace_back();
      } else if (data.scale == ResponseScale::categorical) {
        row.push_back(std::to_string(static_cast<int>(data.values(i, j))));
      } else {
        row.push_back(csv::format_double(data.values(i, j)));
      }
    }
    csv::write_row(out, row);
  }
}

double scale_category(int category, int num_categories) {
  if (num_categories < 2) throw std::invalid_argument("rescaling needs at least 2 categories");
  return 2.0 * (category - 1) / (num_categories - 1) - 1.0;
}

int unscale_category(double scaled, int num_categories) {
  if (num_categories < 2) throw std::invalid_argument("rescaling needs at least 2 categories");
  return static_cast<int>(std::lround((scaled + 1.0) * (num_categories - 1) / 2.0)) + 1;
}

ResponseMatrix rescale_responses(const ResponseMatrix& raw) {
  if (raw.scale != ResponseScale::categorical) throw std::invalid_argument("rescale_responses expects categorical values");
  ResponseMatrix out = raw;
  out.scale = ResponseScale::scaled;
  for (Eigen::Index j = 0; j < raw.cols(); ++j) {
    const int m = raw.questions[static_cast<std::size_t>(j)].num_categories;
    if (m < 2) throw std::invalid_argument("question " + raw.questions[static_cast<std::size_t>(j)].id + " has no spread (M_j < 2)");
    for (Eigen::Index i = 0; i < raw.rows(); ++i) {
      if (!raw.mask(i, j)) {
        out.values(i, j) = 0.0;
        continue;
      }
      const double c = raw.values(i, j);
      if (c < 1 || c > m || c != std::floor(c))
        throw std::invalid_argument("category out of range in " + raw.questions[static_cast<std::size_t>(j)].id);
      out.values(i, j) = scale_category(static_cast<int>(c), m);
    }
  }
  return out;
}

ResponseMatrix one_hot_encode(const ResponseMatrix& data, std::string_view question_id) {
  const int j = data.question_index(question_id);
  if (j < 0) throw std::invalid_argument("unknown question: " + std::string(question_id));
  if (data.scale != ResponseScale::categorical) throw std::invalid_argument("one_hot_encode expects categorical values");
  const QuestionMeta& src = data.questions[static_cast<std::size_t>(j)];
  const int levels = src.num_categories;
  if (levels < 2) throw std::invalid_argument("one-hot encoding needs at least 2 levels");

  ResponseMatrix out;
  out.scale = ResponseScale::categorical;
  out.values = Matrix::Zero(data.rows(), levels);
  out.mask = MaskMatrix::Constant(data.rows(), levels, false);
  for (int c = 0; c < levels; ++c) {
    QuestionMeta q;
    q.id = src.id + "=" + std::to_string(c + 1);
    q.num_categories = 2;
    q.kind = QuestionKind::one_hot_derived;
    q.source_column = src.source_column.empty() ? src.id : src.source_column;
    if (static_cast<std::size_t>(c) < src.labels.size()) q.text = src.text + ": " + src.labels[static_cast<std::size_t>(c)];
    q.labels = {"no", "yes"};
    out.questions.push_back(std::move(q));
  }
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    if (!data.mask(i, j)) continue;
    const int level = static_cast<int>(data.values(i, j));
    for (int c = 0; c < levels; ++c) {
      out.values(i, c) = (c + 1 == level) ? 2.0 : 1.0;
      out.mask(i, c) = true;
    }
  }
  return out;
}

ResponseMatrix replace_with_one_hot(const ResponseMatrix& data, std::string_view question_id) {
  const int j = data.question_index(question_id);
  const ResponseMatrix encoded = one_hot_encode(data, question_id);
  const Eigen::Index k = data.cols() - 1 + encoded.cols();
  ResponseMatrix out;
  out.scale = data.scale;
  out.values.resize(data.rows(), k);
  out.mask.resize(data.rows(), k);
  Eigen::Index dst = 0;
  for (Eigen::Index c = 0; c < data.cols(); ++c) {
    if (c == j) {
      out.values.middleCols(dst, encoded.cols()) = encoded.values;
      out.mask.middleCols(dst, encoded.cols()) = encoded.mask;
      out.questions.insert(out.questions.end(), encoded.questions.begin(), encoded.questions.end());
      dst += encoded.cols();
    } else {
      out.values.col(dst) = data.values.col(c);
      out.mask.col(dst) = data.mask.col(c);
      out.questions.push_back(data.questions[static_cast<std::size_t>(c)]);
      ++dst;
    }
  }
  return out;
}

void SplitSpec::validate() const {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw std::invalid_argument("train_fraction must lie in (0,1)");
  if (const auto* sparse = std::get_if<SparseHoldout>(&holdout)) {
    if (!(sparse->fraction > 0.0 && sparse->fraction < 1.0))
      throw std::invalid_argument("sparse holdout fraction must lie in (0,1)");
  }
  if (const auto* kf = std::get_if<KFoldHoldout>(&holdout)) {
    if (kf->folds < 2 || kf->fold_index < 0 || kf->fold_index >= kf->folds)
      throw std::invalid_argument("invalid k-fold holdout");
  }
}

std::vector<int> question_fold(int num_questions, int folds, int fold_index, std::uint64_t seed) {
  if (folds < 2 || fold_index < 0 || fold_index >= folds) throw std::invalid_argument("invalid fold specification");
  std::vector<int> order(static_cast<std::size_t>(num_questions));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> fold;
  for (std::size_t p = 0; p < order.size(); ++p)
    if (static_cast<int>(p % static_cast<std::size_t>(folds)) == fold_index) fold.push_back(order[p]);
  std::sort(fold.begin(), fold.end());
  return fold;
}

SplitResult split_and_holdout(const ResponseMatrix& data, const SplitSpec& spec) {
  spec.validate();
  const auto n = static_cast<int>(data.rows());
  if (n < 2) throw std::invalid_argument("need at least 2 respondents to split");

  std::mt19937_64 rng(spec.seed);
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  int n_train = static_cast<int>(std::lround(spec.train_fraction * n));
  n_train = std::clamp(n_train, 1, n - 1);

  SplitResult out;
  out.train_rows.assign(perm.begin(), perm.begin() + n_train);
  out.sim_rows.assign(perm.begin() + n_train, perm.end());
  std::sort(out.train_rows.begin(), out.train_rows.end());
  std::sort(out.sim_rows.begin(), out.sim_rows.end());
  out.train = data.select_rows(out.train_rows);
  out.sim = data.select_rows(out.sim_rows);
  out.holdout = MaskMatrix::Constant(out.sim.rows(), out.sim.cols(), false);

  std::visit(
      [&](const auto& h) {
        using H = std::decay_t<decltype(h)>;
        if constexpr (std::is_same_v<H, SparseHoldout>) {
          std::vector<Eigen::Index> observed;
          for (Eigen::Index i = 0; i < out.sim.rows(); ++i) {
            observed.clear();
            for (Eigen::Index j = 0; j < out.sim.cols(); ++j)
              if (out.sim.mask(i, j)) observed.push_back(j);
            if (observed.empty()) continue;
            const auto count = static_cast<std::size_t>(std::ceil(h.fraction * static_cast<double>(observed.size()) - 1e-12));
            std::shuffle(observed.begin(), observed.end(), rng);
            for (std::size_t p = 0; p < count && p < observed.size(); ++p) out.holdout(i, observed[p]) = true;
          }
        } else if constexpr (std::is_same_v<H, LooHoldout>) {
          if (h.question < 0 || h.question >= data.cols()) throw std::invalid_argument("loocv question out of range");
          out.heldout_questions = {h.question};
        } else if constexpr (std::is_same_v<H, KFoldHoldout>) {
          out.heldout_questions = question_fold(static_cast<int>(data.cols()), h.folds, h.fold_index, spec.seed);
        }
      },
      spec.holdout);

  for (int j : out.heldout_questions) out.holdout.col(j) = out.sim.mask.col(j);
  return out;
}

}  // namespace asurvey

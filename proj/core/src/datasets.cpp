#include "deem/datasets.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "deem/errors.hpp"
#include "deem/rng.hpp"

namespace deem {

namespace {

constexpr int kCondIndClasses = 3;
constexpr int kTreeClasses = 3;
constexpr std::size_t kTreeIntermediates = 3;
constexpr std::size_t kTreeLeavesPerNode = 4;
constexpr int kAmpClasses = 5;
constexpr std::size_t kAmpClassifiers = 6;

// Column-stochastic K x K matrix: diagonal `stay`, residual split by a flat Dirichlet per column.
Eigen::MatrixXd tree_transition(int k, double stay, Rng& rng) {
  Eigen::MatrixXd t(k, k);
  std::vector<double> split(static_cast<std::size_t>(k - 1));
  for (int m = 0; m < k; ++m) {
    rng.flat_dirichlet(split);
    std::size_t next = 0;
    for (int l = 0; l < k; ++l) t(l, m) = (l == m) ? stay : (1.0 - stay) * split[next++];
  }
  return t;
}

int draw_column(const Eigen::MatrixXd& t, int parent, Rng& rng) {
  return rng.categorical(std::span<const double>(t.col(parent).data(), static_cast<std::size_t>(t.rows())));
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    const auto first = cell.find_first_not_of(" \t\r");
    const auto last = cell.find_last_not_of(" \t\r");
    cells.push_back(first == std::string::npos ? std::string() : cell.substr(first, last - first + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

template <typename T>
T parse_number(const std::string& cell, std::size_t row, std::size_t column) {
  T value{};
  const char* begin = cell.data();
  const char* end = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (cell.empty() || ec != std::errc() || ptr != end) throw ParseError("cannot parse '" + cell + "'", row, column);
  return value;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty file " + path.string(), 1, 1);
  table.header = split_csv_line(line);
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != table.header.size())
      throw ParseError("expected " + std::to_string(table.header.size()) + " cells, found " + std::to_string(cells.size()),
                       row, std::min(cells.size(), table.header.size()) + 1);
    table.rows.push_back(std::move(cells));
  }
  if (table.rows.empty()) throw ParseError("no data rows in " + path.string(), 2, 1);
  return table;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  out << text;
}

std::vector<int> to_zero_based(std::vector<int> labels) {
  for (int& v : labels) v -= 1;
  return labels;
}

}  // namespace

CondIndData gen_cond_ind(std::size_t n, std::uint64_t seed, std::size_t d, std::size_t informative) {
  if (n < 1) throw InvalidArgument("gen_cond_ind needs n >= 1");
  if (informative > d) throw InvalidArgument("gen_cond_ind: more informative classifiers than classifiers");
  const int k = kCondIndClasses;
  const auto ku = static_cast<std::size_t>(k);
  Rng rng(seed, "cond_ind_params");
  std::vector<double> psi(d * ku * ku, 1.0 / k);
  const double floor = static_cast<double>(k - 1) / k;
  for (std::size_t i = 0; i < informative; ++i) {
    for (std::size_t m = 0; m < ku; ++m) {
      const double diag = rng.uniform(floor, 1.0);
      for (std::size_t l = 0; l < ku; ++l) psi[(i * ku + l) * ku + m] = (l == m) ? diag : (1.0 - diag) / (k - 1);
    }
  }
  DsParams params(d, k, std::move(psi), std::vector<double>(ku, 1.0 / k));
  LabeledSample sample = ds_sample(params, n, derive_seed(seed, "cond_ind_samples"));
  return {std::move(sample.labels), std::move(sample.truth), std::move(params)};
}

Tree3kData gen_tree3k(std::size_t n, std::uint64_t seed) {
  if (n < 1) throw InvalidArgument("gen_tree3k needs n >= 1");
  const int k = kTreeClasses;
  const std::size_t leaves = kTreeIntermediates * kTreeLeavesPerNode;
  Rng param_rng(seed, "tree3k_params");
  std::vector<Eigen::MatrixXd> transitions;
  for (std::size_t node = 0; node < kTreeIntermediates + leaves; ++node)
    transitions.push_back(tree_transition(k, param_rng.uniform(0.7, 1.0), param_rng));

  Rng rng(seed, "tree3k_samples");
  std::vector<int> labels(n * leaves), mids(n * kTreeIntermediates), truth(n);
  for (std::size_t s = 0; s < n; ++s) {
    const int y = rng.uniform_int(k);
    truth[s] = y;
    for (std::size_t j = 0; j < kTreeIntermediates; ++j) {
      const int mid = draw_column(transitions[j], y, rng);
      mids[s * kTreeIntermediates + j] = mid;
      for (std::size_t c = 0; c < kTreeLeavesPerNode; ++c) {
        const std::size_t leaf = j * kTreeLeavesPerNode + c;
        labels[s * leaves + leaf] = draw_column(transitions[kTreeIntermediates + leaf], mid, rng);
      }
    }
  }
  return {LabelMatrix(n, leaves, k, std::move(labels)), LabelVector(k, std::move(truth)),
          LabelMatrix(n, kTreeIntermediates, k, std::move(mids)), std::move(transitions)};
}

AmpData gen_amp_data(std::size_t n, std::uint64_t seed) {
  if (n < 1) throw InvalidArgument("gen_amp_data needs n >= 1");
  const int k = kAmpClasses;
  const std::size_t d = kAmpClassifiers;
  Rng param_rng(seed, "amp_params");
  std::vector<double> accuracies(d - 1);
  for (double& acc : accuracies) acc = param_rng.uniform(0.90, 0.92);

  Rng rng(seed, "amp_samples");
  std::vector<int> labels(n * d), truth(n);
  std::vector<bool> mask(n);
  for (std::size_t s = 0; s < n; ++s) {
    const int y = rng.uniform_int(k);
    const bool expert_class = y < 2;
    truth[s] = y;
    mask[s] = expert_class;
    for (std::size_t i = 0; i + 1 < d; ++i) {
      int label = rng.uniform_int(k);
      if (!expert_class) {
        if (rng.uniform() < accuracies[i]) {
          label = y;
        } else {
          label = rng.uniform_int(k - 1);
          if (label >= y) ++label;
        }
      }
      labels[s * d + i] = label;
    }
    labels[s * d + d - 1] = expert_class ? y : rng.uniform_int(k);
  }
  return {LabelMatrix(n, d, k, std::move(labels)), LabelVector(k, std::move(truth)), std::move(mask),
          std::move(accuracies)};
}

LabelMatrix inject_expert(const LabelMatrix& labels, const LabelVector& truth, std::size_t column,
                          const std::vector<int>& classes) {
  if (truth.size() != labels.samples()) throw ShapeMismatch("truth length does not match sample count");
  if (column >= labels.classifiers()) throw InvalidArgument("expert column out of range");
  std::vector<int> data = labels.data();
  for (std::size_t s = 0; s < labels.samples(); ++s)
    if (std::find(classes.begin(), classes.end(), truth[s]) != classes.end())
      data[s * labels.classifiers() + column] = truth[s];
  return {labels.samples(), labels.classifiers(), labels.num_classes(), std::move(data)};
}

PredictionTable load_predictions_csv(const std::filesystem::path& path, int num_classes) {
  const CsvTable table = read_csv(path);
  const bool has_truth = !table.header.empty() && table.header.back() == "label";
  const std::size_t d = table.header.size() - (has_truth ? 1 : 0);
  if (d < 1) throw ParseError("no classifier columns", 1, 1);
  for (std::size_t i = 0; i < d; ++i)
    if (table.header[i] != "clf_" + std::to_string(i + 1))
      throw ParseError("expected header 'clf_" + std::to_string(i + 1) + "', found '" + table.header[i] + "'", 1, i + 1);

  const std::size_t n = table.rows.size();
  std::vector<int> labels(n * d), truth;
  if (has_truth) truth.resize(n);
  int max_label = 0;
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t c = 0; c < table.header.size(); ++c) {
      const int v = parse_number<int>(table.rows[s][c], s + 2, c + 1);
      if (v < 1)
        throw LabelOutOfRange("label " + std::to_string(v) + " at row " + std::to_string(s + 2) + ", column " +
                              std::to_string(c + 1) + " is below 1");
      if (num_classes > 0 && v > num_classes)
        throw LabelOutOfRange("label " + std::to_string(v) + " at row " + std::to_string(s + 2) + ", column " +
                              std::to_string(c + 1) + " exceeds K = " + std::to_string(num_classes));
      max_label = std::max(max_label, v);
      if (c < d) labels[s * d + c] = v;
      else truth[s] = v;
    }
  }
  const int k = num_classes > 0 ? num_classes : std::max(2, max_label);
  PredictionTable out{LabelMatrix(n, d, k, to_zero_based(std::move(labels))), std::nullopt};
  if (has_truth) out.truth = LabelVector(k, to_zero_based(std::move(truth)));
  return out;
}

void save_predictions_csv(const std::filesystem::path& path, const LabelMatrix& labels,
                          const std::optional<LabelVector>& truth) {
  if (truth && truth->size() != labels.samples()) throw ShapeMismatch("truth length does not match sample count");
  std::string text;
  for (std::size_t i = 0; i < labels.classifiers(); ++i) {
    if (i) text += ',';
    text += "clf_" + std::to_string(i + 1);
  }
  if (truth) text += ",label";
  text += '\n';
  for (std::size_t s = 0; s < labels.samples(); ++s) {
    for (std::size_t i = 0; i < labels.classifiers(); ++i) {
      if (i) text += ',';
      text += std::to_string(labels(s, i) + 1);
    }
    if (truth) text += ',' + std::to_string((*truth)[s] + 1);
    text += '\n';
  }
  write_file(path, text);
}

OneHotBatch load_soft_predictions_csv(const std::filesystem::path& path, int num_classes) {
  if (num_classes < 2) throw InvalidArgument("soft predictions need K >= 2");
  const CsvTable table = read_csv(path);
  const auto ku = static_cast<std::size_t>(num_classes);
  if (table.header.size() % ku != 0) throw ParseError("column count is not a multiple of K", 1, table.header.size());
  const std::size_t d = table.header.size() / ku;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    const std::string expected = "clf_" + std::to_string(c / ku + 1) + "_class_" + std::to_string(c % ku + 1);
    if (table.header[c] != expected)
      throw ParseError("expected header '" + expected + "', found '" + table.header[c] + "'", 1, c + 1);
  }
  Eigen::MatrixXd data(static_cast<Eigen::Index>(table.header.size()), static_cast<Eigen::Index>(table.rows.size()));
  for (std::size_t s = 0; s < table.rows.size(); ++s)
    for (std::size_t c = 0; c < table.header.size(); ++c)
      data(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(s)) = parse_number<double>(table.rows[s][c], s + 2, c + 1);
  return {num_classes, d, std::move(data)};
}

void save_soft_predictions_csv(const std::filesystem::path& path, const OneHotBatch& batch) {
  const int k = batch.num_classes();
  std::string text;
  for (std::size_t i = 0; i < batch.units(); ++i)
    for (int l = 0; l < k; ++l) {
      if (i || l) text += ',';
      text += "clf_" + std::to_string(i + 1) + "_class_" + std::to_string(l + 1);
    }
  text += '\n';
  char buf[32];
  for (std::size_t s = 0; s < batch.samples(); ++s) {
    for (std::size_t i = 0; i < batch.units(); ++i)
      for (int l = 0; l < k; ++l) {
        if (i || l) text += ',';
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, batch(s, l, i));
        text.append(buf, ptr);
      }
    text += '\n';
  }
  write_file(path, text);
}

LabelVector load_labels_csv(const std::filesystem::path& path, int num_classes) {
  const CsvTable table = read_csv(path);
  const auto it = std::find(table.header.begin(), table.header.end(), "label");
  if (it == table.header.end()) throw ParseError("no 'label' column", 1, 1);
  const auto col = static_cast<std::size_t>(it - table.header.begin());
  std::vector<int> labels(table.rows.size());
  int max_label = 0;
  for (std::size_t s = 0; s < table.rows.size(); ++s) {
    const int v = parse_number<int>(table.rows[s][col], s + 2, col + 1);
    if (v < 1 || (num_classes > 0 && v > num_classes))
      throw LabelOutOfRange("label " + std::to_string(v) + " at row " + std::to_string(s + 2) + " out of range");
    max_label = std::max(max_label, v);
    labels[s] = v - 1;
  }
  return {num_classes > 0 ? num_classes : std::max(2, max_label), std::move(labels)};
}

void save_labels_csv(const std::filesystem::path& path, const LabelVector& labels) {
  std::string text = "label\n";
  for (int v : labels.data()) text += std::to_string(v + 1) + '\n';
  write_file(path, text);
}

std::vector<bool> load_mask_csv(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  if (table.header.size() != 1) throw ParseError("mask file must have a single column", 1, 2);
  std::vector<bool> mask(table.rows.size());
  for (std::size_t s = 0; s < table.rows.size(); ++s) {
    const int v = parse_number<int>(table.rows[s][0], s + 2, 1);
    if (v != 0 && v != 1) throw ParseError("mask entries must be 0 or 1", s + 2, 1);
    mask[s] = v == 1;
  }
  return mask;
}

void save_mask_csv(const std::filesystem::path& path, const std::vector<bool>& mask) {
  std::string text = "expert\n";
  for (bool b : mask) text += b ? "1\n" : "0\n";
  write_file(path, text);
}

}  // namespace deem

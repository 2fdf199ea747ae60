#include "pseudoreg/data_model.hpp"

#include "pseudoreg/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace pseudoreg {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
    } else {
      cell.push_back(c);
    }
  }
  cells.push_back(std::move(cell));
  return cells;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double value = 0.0;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

bool is_missing(const std::string& s) { return s.empty() || s == "NA" || s == "NaN" || s == "."; }

std::string level_label(const CovariateValue& v) {
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  const double d = std::get<double>(v);
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), d);
  return std::string(buf, ptr);
}

const std::string& term_column(const DesignTerm& term) {
  static const std::string none;
  if (const auto* t = std::get_if<NumericTerm>(&term)) return t->column;
  if (const auto* t = std::get_if<FactorTerm>(&term)) return t->column;
  return none;
}

// Encoded columns of a single (numeric or factor) parent: names and values.
struct EncodedBlock {
  std::vector<std::string> names;
  std::vector<Eigen::VectorXd> columns;
};

EncodedBlock encode_numeric(const Dataset& data, const std::string& column) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(data.size()));
  for (std::size_t k = 0; k < data.size(); ++k) {
    const auto& cell = data[k].covariates.at(column);
    const auto* d = std::get_if<double>(&cell);
    if (d == nullptr) {
      throw SchemaError("column '" + column + "' declared numeric holds non-numeric value '" +
                        std::get<std::string>(cell) + "'");
    }
    v(static_cast<Eigen::Index>(k)) = *d;
  }
  return {{column}, {std::move(v)}};
}

EncodedBlock encode_factor(const Dataset& data, const std::string& column,
                           const std::vector<std::string>& levels) {
  EncodedBlock block;
  for (const auto& level : levels) {
    block.names.push_back(column + level);
    block.columns.emplace_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(data.size())));
  }
  for (std::size_t k = 0; k < data.size(); ++k) {
    const std::string label = level_label(data[k].covariates.at(column));
    const auto it = std::find(levels.begin(), levels.end(), label);
    if (it != levels.end()) {
      block.columns[static_cast<std::size_t>(it - levels.begin())](static_cast<Eigen::Index>(k)) = 1.0;
    }
  }
  return block;
}

void check_known_levels(const Dataset& data, const std::string& column, const std::string& reference,
                        const std::vector<std::string>& levels) {
  for (std::size_t k = 0; k < data.size(); ++k) {
    const std::string label = level_label(data[k].covariates.at(column));
    if (label != reference && std::find(levels.begin(), levels.end(), label) == levels.end()) {
      throw ValidationError("level '" + label + "' of factor '" + column + "' was not seen when the design was built",
                            k + 1);
    }
  }
}

DesignMatrix assemble(const Dataset& data, const DesignLayout& layout) {
  const auto n = static_cast<Eigen::Index>(data.size());
  std::vector<std::string> names;
  std::vector<Eigen::VectorXd> columns;
  if (layout.intercept) {
    names.emplace_back("(Intercept)");
    columns.emplace_back(Eigen::VectorXd::Ones(n));
  }

  std::map<std::string, EncodedBlock> blocks;
  const auto block_for = [&](const std::string& column) -> const EncodedBlock& {
    auto it = blocks.find(column);
    if (it != blocks.end()) return it->second;
    const auto lv = layout.factor_levels.find(column);
    EncodedBlock b = lv == layout.factor_levels.end() ? encode_numeric(data, column)
                                                      : encode_factor(data, column, lv->second);
    return blocks.emplace(column, std::move(b)).first->second;
  };

  for (const auto& term : layout.terms) {
    if (const auto* inter = std::get_if<InteractionTerm>(&term)) {
      EncodedBlock acc{{""}, {Eigen::VectorXd::Ones(n)}};
      for (const auto& parent : inter->columns) {
        const EncodedBlock& b = block_for(parent);
        EncodedBlock next;
        for (std::size_t i = 0; i < acc.names.size(); ++i) {
          for (std::size_t j = 0; j < b.names.size(); ++j) {
            next.names.push_back(acc.names[i].empty() ? b.names[j] : acc.names[i] + ":" + b.names[j]);
            next.columns.emplace_back(acc.columns[i].cwiseProduct(b.columns[j]));
          }
        }
        acc = std::move(next);
      }
      for (std::size_t i = 0; i < acc.names.size(); ++i) {
        names.push_back(acc.names[i]);
        columns.push_back(acc.columns[i]);
      }
    } else {
      const EncodedBlock& b = block_for(term_column(term));
      names.insert(names.end(), b.names.begin(), b.names.end());
      columns.insert(columns.end(), b.columns.begin(), b.columns.end());
    }
  }

  std::set<std::string> seen;
  for (const auto& name : names) {
    if (!seen.insert(name).second) throw DesignError("duplicate column name '" + name + "' after encoding");
  }

  DesignMatrix out;
  out.rows.resize(n, static_cast<Eigen::Index>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j) out.rows.col(static_cast<Eigen::Index>(j)) = columns[j];
  out.column_names = names;
  out.layout = layout;
  out.layout.column_names = names;
  return out;
}

}  // namespace

Dataset::Dataset(std::vector<SurvivalRecord> records) : records_(std::move(records)) {
  if (records_.size() < 2) throw ValidationError("a dataset needs at least two records", records_.size());
  for (std::size_t k = 0; k < records_.size(); ++k) {
    const auto& r = records_[k];
    if (!(r.time > 0.0)) throw ValidationError("follow-up time must be positive", k + 1);
    if (k > 0) {
      const auto& ref = records_.front().covariates;
      const bool same_keys =
          r.covariates.size() == ref.size() &&
          std::equal(r.covariates.begin(), r.covariates.end(), ref.begin(),
                     [](const auto& a, const auto& b) { return a.first == b.first; });
      if (!same_keys) throw ValidationError("covariate columns differ from the first record", k + 1);
    }
  }
}

std::vector<std::string> Dataset::covariate_names() const {
  std::vector<std::string> names;
  if (records_.empty()) return names;
  for (const auto& [name, value] : records_.front().covariates) names.push_back(name);
  return names;
}

std::size_t Dataset::censored_count() const {
  return static_cast<std::size_t>(
      std::count_if(records_.begin(), records_.end(), [](const auto& r) { return !r.is_event(); }));
}

Dataset Dataset::permuted(const std::vector<std::size_t>& order) const {
  std::vector<SurvivalRecord> out;
  out.reserve(order.size());
  for (const auto k : order) out.push_back(records_.at(k));
  return Dataset(std::move(out));
}

Dataset parse_csv(const std::string& text, const CsvSchema& schema) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("empty CSV input (header row required)");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::vector<std::string> header = split_csv_line(line);
  for (auto& h : header) h = trim(h);
  const auto find_column = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw SchemaError("missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t time_col = find_column(schema.time_column);
  const std::size_t status_col = find_column(schema.status_column);
  for (const auto& [name, kind] : schema.kinds) find_column(name);

  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " cells, found " + std::to_string(cells.size()),
                       rows.size() + 1, "*");
    }
    for (auto& c : cells) c = trim(c);
    rows.push_back(std::move(cells));
  }

  // Undeclared covariates are numeric when every cell parses as a number.
  std::vector<ColumnKind> kinds(header.size(), ColumnKind::numeric);
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (j == time_col || j == status_col) continue;
    const auto declared = schema.kinds.find(header[j]);
    if (declared != schema.kinds.end()) {
      kinds[j] = declared->second;
      continue;
    }
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (!is_missing(rows[r][j]) && !parse_number(rows[r][j])) {
        kinds[j] = ColumnKind::factor;
        break;
      }
    }
  }

  std::vector<SurvivalRecord> records;
  records.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::size_t row = r + 1;
    SurvivalRecord rec;
    for (std::size_t j = 0; j < header.size(); ++j) {
      const std::string& cell = rows[r][j];
      if (is_missing(cell)) throw ParseError("missing value", row, header[j]);
      if (j == time_col) {
        const auto t = parse_number(cell);
        if (!t) throw ParseError("unparsable time '" + cell + "'", row, header[j]);
        if (!(*t > 0.0)) throw ValidationError("non-positive follow-up time " + cell, row);
        rec.time = *t;
      } else if (j == status_col) {
        const auto s = parse_number(cell);
        if (!s) throw ParseError("unparsable status '" + cell + "'", row, header[j]);
        if (*s == 0.0) {
          rec.status = Status::censored;
        } else if (*s == 1.0) {
          rec.status = Status::event;
        } else {
          throw ValidationError("status must be 0 (censored) or 1 (event), got " + cell, row);
        }
      } else if (kinds[j] == ColumnKind::factor) {
        rec.covariates.emplace(header[j], cell);
      } else {
        const auto v = parse_number(cell);
        if (!v) throw ParseError("unparsable number '" + cell + "'", row, header[j]);
        rec.covariates.emplace(header[j], *v);
      }
    }
    records.push_back(std::move(rec));
  }
  if (records.size() < 2) throw ValidationError("a dataset needs at least two records", records.size());
  return Dataset(std::move(records));
}

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), schema);
}

DesignMatrix encode_design(const Dataset& dataset, const DesignSpec& spec) {
  DesignLayout layout;
  layout.intercept = spec.intercept;
  layout.terms = spec.terms;

  const auto names = dataset.covariate_names();
  const auto require_column = [&](const std::string& c) {
    if (std::find(names.begin(), names.end(), c) == names.end()) {
      throw SchemaError("design references unknown column '" + c + "'");
    }
  };

  std::set<std::string> declared;
  for (const auto& term : spec.terms) {
    if (const auto* num = std::get_if<NumericTerm>(&term)) {
      require_column(num->column);
      declared.insert(num->column);
    } else if (const auto* fac = std::get_if<FactorTerm>(&term)) {
      require_column(fac->column);
      declared.insert(fac->column);
      std::set<std::string> observed;
      for (const auto& rec : dataset.records()) observed.insert(level_label(rec.covariates.at(fac->column)));
      if (observed.size() < 2) {
        throw DesignError("factor '" + fac->column + "' has a single observed level");
      }
      if (!observed.count(fac->reference)) {
        throw SchemaError("reference level '" + fac->reference + "' not observed in factor '" + fac->column + "'");
      }
      std::vector<std::string> levels;
      if (fac->level_order.empty()) {
        for (const auto& l : observed)
          if (l != fac->reference) levels.push_back(l);
      } else {
        levels = fac->level_order;
        std::set<std::string> given(levels.begin(), levels.end());
        std::set<std::string> expected = observed;
        expected.erase(fac->reference);
        if (given != expected || given.size() != levels.size()) {
          throw SchemaError("level order of factor '" + fac->column +
                            "' must list every non-reference level exactly once");
        }
      }
      layout.factor_levels[fac->column] = std::move(levels);
      layout.factor_reference[fac->column] = fac->reference;
    }
  }
  for (const auto& term : spec.terms) {
    if (const auto* inter = std::get_if<InteractionTerm>(&term)) {
      if (inter->columns.size() < 2) throw SchemaError("an interaction needs at least two columns");
      for (const auto& c : inter->columns) {
        if (!declared.count(c)) throw SchemaError("interaction references undeclared column '" + c + "'");
      }
    }
  }
  return assemble(dataset, layout);
}

DesignMatrix encode_with_layout(const Dataset& dataset, const DesignLayout& layout) {
  for (const auto& [column, levels] : layout.factor_levels) {
    check_known_levels(dataset, column, layout.factor_reference.at(column), levels);
  }
  return assemble(dataset, layout);
}

std::size_t expected_column_count(const DesignSpec& spec,
                                  const std::map<std::string, std::size_t>& levels_per_factor) {
  const auto width = [&](const std::string& column) -> std::size_t {
    const auto it = levels_per_factor.find(column);
    return it == levels_per_factor.end() ? 1 : it->second - 1;
  };
  std::size_t q = spec.intercept ? 1 : 0;
  for (const auto& term : spec.terms) {
    if (const auto* inter = std::get_if<InteractionTerm>(&term)) {
      std::size_t w = 1;
      for (const auto& c : inter->columns) w *= width(c);
      q += w;
    } else {
      q += width(term_column(term));
    }
  }
  return q;
}

DataSchema parse_schema(const std::string& json_text) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("invalid schema JSON: ") + e.what());
  }
  DataSchema schema;
  try {
    schema.csv.time_column = doc.value("time", "time");
    schema.csv.status_column = doc.value("status", "status");
    schema.design.intercept = doc.value("intercept", true);
    for (const auto& t : doc.value("terms", json::array())) {
      if (t.contains("numeric")) {
        const auto c = t.at("numeric").get<std::string>();
        schema.design.terms.emplace_back(NumericTerm{c});
        schema.csv.kinds[c] = ColumnKind::numeric;
      } else if (t.contains("factor")) {
        FactorTerm f;
        f.column = t.at("factor").get<std::string>();
        f.reference = t.at("reference").get<std::string>();
        f.level_order = t.value("levels", std::vector<std::string>{});
        schema.csv.kinds[f.column] = ColumnKind::factor;
        schema.design.terms.emplace_back(std::move(f));
      } else if (t.contains("interaction")) {
        schema.design.terms.emplace_back(InteractionTerm{t.at("interaction").get<std::vector<std::string>>()});
      } else {
        throw SchemaError("unknown term " + t.dump());
      }
    }
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed schema: ") + e.what());
  }
  return schema;
}

DataSchema load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open schema '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_schema(buf.str());
}

DataSchema infer_schema(const Dataset& dataset) {
  DataSchema schema;
  for (const auto& name : dataset.covariate_names()) {
    if (std::holds_alternative<std::string>(dataset[0].covariates.at(name))) {
      std::set<std::string> levels;
      for (const auto& rec : dataset.records()) levels.insert(level_label(rec.covariates.at(name)));
      schema.design.terms.emplace_back(FactorTerm{name, *levels.begin(), {}});
      schema.csv.kinds[name] = ColumnKind::factor;
    } else {
      schema.design.terms.emplace_back(NumericTerm{name});
      schema.csv.kinds[name] = ColumnKind::numeric;
    }
  }
  return schema;
}

}  // namespace pseudoreg

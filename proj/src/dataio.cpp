#include "latticomp/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json_support.hpp"
#include "latticomp/format.hpp"
#include "latticomp/rng.hpp"

namespace latticomp {

Shape DesignSpace::shape() const {
  std::vector<std::size_t> dims;
  for (const auto& m : modes) dims.push_back(m.labels.size());
  return Shape(dims);
}

std::vector<ModeKind> DesignSpace::kinds() const {
  std::vector<ModeKind> out;
  for (const auto& m : modes) out.push_back(m.kind);
  return out;
}

std::size_t DesignSpace::mode_of(const std::string& name) const {
  for (std::size_t i = 0; i < modes.size(); ++i) {
    if (modes[i].name == name) return i;
  }
  throw std::invalid_argument("design space has no mode named '" + name + "'");
}

void DesignSpace::validate() const {
  if (modes.size() < 2) throw std::invalid_argument("design space needs at least two modes");
  std::vector<std::string> names;
  for (const auto& m : modes) {
    if (m.name.empty()) throw std::invalid_argument("mode name must not be empty");
    if (m.name.find(':') != std::string::npos) throw std::invalid_argument("mode name '" + m.name + "' contains ':'");
    if (m.labels.empty()) throw std::invalid_argument("mode '" + m.name + "' has no levels");
    auto sorted = m.labels;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw std::invalid_argument("mode '" + m.name + "' has duplicate level labels");
    }
    if (m.kind == ModeKind::ordinal) {
      for (const auto& l : m.labels) {
        try {
          parse_double(l);
        } catch (const std::invalid_argument&) {
          throw std::invalid_argument("ordinal mode '" + m.name + "' has non-numeric level '" + l + "'");
        }
      }
    }
    names.push_back(m.name);
  }
  std::sort(names.begin(), names.end());
  if (std::adjacent_find(names.begin(), names.end()) != names.end()) {
    throw std::invalid_argument("design space has duplicate mode names");
  }
  if (slice_mode >= modes.size()) throw std::invalid_argument("slice mode out of range");
  if (property_mode && *property_mode >= modes.size()) throw std::invalid_argument("property mode out of range");
  if (property_mode && *property_mode == slice_mode) {
    throw std::invalid_argument("slice mode and property mode must differ");
  }
}

void SyntheticSpec::validate() const {
  if (shape.size() < 3) throw std::invalid_argument("synthetic shape needs geometry, design and property modes");
  if (shape.front() != 5) throw std::invalid_argument("synthetic geometry mode must have 5 levels");
  if (shape.back() != 2) throw std::invalid_argument("synthetic property mode must have 2 levels (E, E_tilde)");
  const std::size_t middle =
      std::accumulate(shape.begin() + 1, shape.end() - 1, std::size_t{1}, std::multiplies<>());
  if (middle * shape.back() != 54) {
    throw std::invalid_argument("synthetic geometry slices must hold 54 values, got " +
                                std::to_string(middle * shape.back()));
  }
  if (latent_rank == 0) throw std::invalid_argument("latent rank must be at least 1");
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) throw std::invalid_argument("noise_std must be >= 0");
}

DesignSpace default_design_space(const Shape& shape) {
  DesignSpace space;
  const std::size_t n = shape.order();
  for (std::size_t m = 0; m < n; ++m) {
    ModeInfo info;
    const std::size_t d = shape.dim(m);
    if (m == 0 && d == kGeometryNames.size()) {
      info = {"geometry", ModeKind::categorical, kGeometryNames};
    } else if (m + 1 == n && d == kPropertyNames.size()) {
      info = {"property", ModeKind::categorical, kPropertyNames};
      space.property_mode = m;
    } else {
      info.name = n == 3 ? "config" : "design_" + std::to_string(m);
      info.kind = ModeKind::ordinal;
      for (std::size_t i = 0; i < d; ++i) info.labels.push_back(std::to_string(i));
    }
    space.modes.push_back(std::move(info));
  }
  return space;
}

namespace {

// Column of positive values: a uniform draw per categorical level, or a
// min-max scaled random walk per ordinal level so neighbours stay close.
std::vector<double> positive_factor(std::size_t dim, ModeKind kind, double lo, Rng& rng) {
  std::vector<double> f(dim);
  if (kind == ModeKind::categorical) {
    for (auto& v : f) v = rng.uniform(lo, lo + 1.0);
    return f;
  }
  double walk = 0.0;
  for (auto& v : f) {
    walk += rng.normal();
    v = walk;
  }
  const auto [mn, mx] = std::minmax_element(f.begin(), f.end());
  const double a = *mn;
  const double b = *mx;
  for (auto& v : f) v = b > a ? lo + (v - a) / (b - a) : lo + 0.5;
  return f;
}

double population_std(const std::vector<double>& v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

}  // namespace

SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  SyntheticDataset out;
  out.space = default_design_space(Shape(spec.shape));
  const std::size_t design_modes = spec.shape.size() - 1;
  const Shape design_shape(std::vector<std::size_t>(spec.shape.begin(), spec.shape.end() - 1));
  const std::size_t designs = design_shape.cell_count();

  Rng rng(spec.seed);
  // Stiffness latent: sum over components of products of per-mode factors.
  std::vector<double> stiffness(designs, 0.0);
  for (std::size_t r = 0; r < spec.latent_rank; ++r) {
    std::vector<std::vector<double>> factors;
    for (std::size_t m = 0; m < design_modes; ++m) {
      factors.push_back(positive_factor(spec.shape[m], out.space.modes[m].kind, 0.5, rng));
    }
    for (std::size_t c = 0; c < designs; ++c) {
      const auto idx = delinearize(design_shape, c);
      double prod = 10.0;
      for (std::size_t m = 0; m < design_modes; ++m) prod *= factors[m][idx[m]];
      stiffness[c] += prod;
    }
  }

  std::vector<std::vector<double>> mass_factors;
  for (std::size_t m = 0; m < design_modes; ++m) {
    mass_factors.push_back(positive_factor(spec.shape[m], out.space.modes[m].kind, 0.5, rng));
  }
  out.mass.assign(designs, 1.0);
  for (std::size_t c = 0; c < designs; ++c) {
    const auto idx = delinearize(design_shape, c);
    for (std::size_t m = 0; m < design_modes; ++m) out.mass[c] *= mass_factors[m][idx[m]];
  }

  std::vector<double> e(designs);
  std::vector<double> e_tilde(designs);
  for (std::size_t c = 0; c < designs; ++c) {
    e[c] = stiffness[c];
    e_tilde[c] = stiffness[c] / out.mass[c];
  }

  // Property is the fastest-varying mode, so cell 2c is E and 2c+1 is E_tilde.
  std::vector<double> clean(2 * designs);
  std::vector<double> noisy(2 * designs);
  const double sd_e = spec.noise_std * population_std(e);
  const double sd_t = spec.noise_std * population_std(e_tilde);
  for (std::size_t c = 0; c < designs; ++c) {
    clean[2 * c] = e[c];
    clean[2 * c + 1] = e_tilde[c];
    // Reflected at zero so both properties stay strictly positive.
    noisy[2 * c] = std::abs(e[c] + rng.normal(0.0, 1.0) * sd_e);
    noisy[2 * c + 1] = std::abs(e_tilde[c] + rng.normal(0.0, 1.0) * sd_t);
  }
  out.clean = DenseTensor(Shape(spec.shape), std::move(clean));
  out.truth = DenseTensor(Shape(spec.shape), std::move(noisy));
  return out;
}

DenseTensor low_rank_tensor(const Shape& shape, std::size_t rank, std::uint64_t seed) {
  if (rank == 0) throw std::invalid_argument("rank must be at least 1");
  Rng rng(seed);
  std::vector<std::vector<double>> factors(shape.order());
  for (std::size_t m = 0; m < shape.order(); ++m) {
    factors[m].resize(shape.dim(m) * rank);
    for (auto& v : factors[m]) v = rng.uniform(0.5, 1.5);
  }
  std::vector<double> values(shape.cell_count(), 0.0);
  for (std::size_t c = 0; c < values.size(); ++c) {
    const auto idx = delinearize(shape, c);
    for (std::size_t r = 0; r < rank; ++r) {
      double prod = 1.0;
      for (std::size_t m = 0; m < shape.order(); ++m) prod *= factors[m][idx[m] * rank + r];
      values[c] += prod;
    }
  }
  return DenseTensor(shape, std::move(values));
}

// --- CSV ------------------------------------------------------------------

namespace {

std::string quote_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_fields(const std::string& line, std::size_t row) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  if (quoted) throw std::runtime_error("row " + std::to_string(row) + ": unterminated quoted field");
  return fields;
}

void write_header(std::ostream& out, const DesignSpace& space) {
  for (const auto& m : space.modes) out << quote_field("mode:" + m.name + ":" + std::string(to_string(m.kind))) << ',';
  out << "value\n";
}

void write_row(std::ostream& out, const DesignSpace& space, std::span<const std::size_t> index, double value) {
  for (std::size_t m = 0; m < index.size(); ++m) out << quote_field(space.modes[m].labels[index[m]]) << ',';
  out << format_double(value) << '\n';
}

void check_space(const Shape& shape, const DesignSpace& space) {
  space.validate();
  if (!(space.shape() == shape)) throw std::invalid_argument("design space does not match tensor shape");
}

}  // namespace

void write_csv(std::ostream& out, const DenseTensor& tensor, const DesignSpace& space) {
  check_space(tensor.shape(), space);
  write_header(out, space);
  for (std::size_t c = 0; c < tensor.size(); ++c) write_row(out, space, delinearize(tensor.shape(), c), tensor[c]);
}

void write_csv(std::ostream& out, const ObservationSet& obs, const DesignSpace& space) {
  check_space(obs.shape(), space);
  write_header(out, space);
  std::vector<std::size_t> order(obs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<std::size_t> offsets(obs.size());
  for (std::size_t i = 0; i < obs.size(); ++i) offsets[i] = linearize(obs.shape(), obs[i].index);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return offsets[a] < offsets[b]; });
  for (std::size_t i : order) write_row(out, space, obs[i].index, obs[i].value);
}

namespace {

template <typename Data>
void export_to(const std::filesystem::path& path, const Data& data, const DesignSpace& space) {
  std::ostringstream buffer;
  write_csv(buffer, data, space);
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw std::runtime_error("cannot open " + path.string() + " for writing");
  file << buffer.str();
  if (!file.flush()) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace

void export_csv(const std::filesystem::path& path, const DenseTensor& tensor, const DesignSpace& space) {
  export_to(path, tensor, space);
}

void export_csv(const std::filesystem::path& path, const ObservationSet& obs, const DesignSpace& space) {
  export_to(path, obs, space);
}

LoadedCsv read_csv(std::istream& in, const std::optional<DesignSpace>& space) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty CSV: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_fields(line, 1);
  if (header.size() < 3 || header.back() != "value") {
    throw std::runtime_error("CSV header must list at least two mode columns followed by 'value'");
  }
  const std::size_t n_modes = header.size() - 1;
  DesignSpace parsed;
  for (std::size_t m = 0; m < n_modes; ++m) {
    const auto& col = header[m];
    const auto second = col.rfind(':');
    if (col.rfind("mode:", 0) != 0 || second == std::string::npos || second < 5) {
      throw std::runtime_error("header column '" + col + "' is not mode:<name>:<kind>");
    }
    ModeInfo info;
    info.name = col.substr(5, second - 5);
    try {
      info.kind = parse_mode_kind(col.substr(second + 1));
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error("header column '" + col + "': " + e.what());
    }
    parsed.modes.push_back(std::move(info));
  }
  if (space) {
    if (space->modes.size() != n_modes) throw std::runtime_error("CSV mode count does not match design space");
    for (std::size_t m = 0; m < n_modes; ++m) {
      if (space->modes[m].name != parsed.modes[m].name || space->modes[m].kind != parsed.modes[m].kind) {
        throw std::runtime_error("CSV mode '" + parsed.modes[m].name + "' does not match design space mode '" +
                                 space->modes[m].name + "'");
      }
    }
  }

  struct Row {
    std::size_t line;
    std::vector<std::string> labels;
    double value;
  };
  std::vector<Row> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_fields(line, line_no);
    if (fields.size() != header.size()) {
      throw std::runtime_error("row " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                               " fields, expected " + std::to_string(header.size()));
    }
    double value = 0.0;
    try {
      value = parse_double(fields.back());
    } catch (const std::invalid_argument&) {
      throw std::runtime_error("row " + std::to_string(line_no) + ": non-numeric value '" + fields.back() + "'");
    }
    if (!std::isfinite(value)) throw std::runtime_error("row " + std::to_string(line_no) + ": non-finite value");
    fields.pop_back();
    rows.push_back({line_no, std::move(fields), value});
  }
  if (rows.empty()) throw std::runtime_error("no observations");

  if (space) {
    parsed = *space;
  } else {
    for (std::size_t m = 0; m < n_modes; ++m) {
      auto& labels = parsed.modes[m].labels;
      for (const auto& r : rows) {
        if (std::find(labels.begin(), labels.end(), r.labels[m]) == labels.end()) labels.push_back(r.labels[m]);
      }
      if (parsed.modes[m].kind == ModeKind::ordinal) {
        std::vector<std::pair<double, std::string>> keyed;
        for (const auto& l : labels) {
          try {
            keyed.emplace_back(parse_double(l), l);
          } catch (const std::invalid_argument&) {
            throw std::runtime_error("ordinal mode '" + parsed.modes[m].name + "' has non-numeric level '" + l + "'");
          }
        }
        std::sort(keyed.begin(), keyed.end());
        for (std::size_t i = 0; i < keyed.size(); ++i) labels[i] = keyed[i].second;
      }
    }
    const auto prop = std::find_if(parsed.modes.begin(), parsed.modes.end(),
                                   [](const ModeInfo& m) { return m.name == "property"; });
    if (prop != parsed.modes.end()) parsed.property_mode = static_cast<std::size_t>(prop - parsed.modes.begin());
    parsed.slice_mode = parsed.property_mode == 0 ? 1 : 0;
  }
  try {
    parsed.validate();
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(e.what());
  }

  std::vector<std::map<std::string, std::size_t>> lookup(n_modes);
  for (std::size_t m = 0; m < n_modes; ++m) {
    for (std::size_t i = 0; i < parsed.modes[m].labels.size(); ++i) lookup[m][parsed.modes[m].labels[i]] = i;
  }
  const Shape shape = parsed.shape();
  std::map<std::size_t, std::size_t> seen;
  std::vector<Observation> entries;
  entries.reserve(rows.size());
  for (const auto& r : rows) {
    MultiIndex idx(n_modes);
    for (std::size_t m = 0; m < n_modes; ++m) {
      const auto it = lookup[m].find(r.labels[m]);
      if (it == lookup[m].end()) {
        throw std::runtime_error("row " + std::to_string(r.line) + ": unknown level '" + r.labels[m] + "' for mode '" +
                                 parsed.modes[m].name + "'");
      }
      idx[m] = it->second;
    }
    const auto [it, inserted] = seen.emplace(linearize(shape, idx), r.line);
    if (!inserted) {
      throw std::runtime_error("duplicate cell at rows " + std::to_string(it->second) + " and " +
                               std::to_string(r.line));
    }
    entries.push_back({std::move(idx), r.value});
  }
  return {ObservationSet(shape, std::move(entries)), std::move(parsed)};
}

LoadedCsv load_csv(const std::filesystem::path& path, const std::optional<DesignSpace>& space) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open " + path.string());
  try {
    return read_csv(file, space);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

// --- design space JSON ------------------------------------------------------

namespace detail {

nlohmann::json design_space_json(const DesignSpace& space) {
  nlohmann::json modes = nlohmann::json::array();
  for (const auto& m : space.modes) {
    modes.push_back({{"name", m.name}, {"kind", std::string(to_string(m.kind))}, {"labels", m.labels}});
  }
  nlohmann::json doc = {{"modes", modes}, {"slice_mode", space.slice_mode}};
  doc["property_mode"] = space.property_mode ? nlohmann::json(*space.property_mode) : nlohmann::json(nullptr);
  return doc;
}

DesignSpace design_space_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw std::invalid_argument("design space must be a JSON object");
  for (const auto& [key, _] : doc.items()) {
    if (key != "modes" && key != "slice_mode" && key != "property_mode") {
      throw std::invalid_argument("unknown design space field '" + key + "'");
    }
  }
  DesignSpace space;
  try {
    for (const auto& m : doc.at("modes")) {
      ModeInfo info;
      info.name = m.at("name").get<std::string>();
      info.kind = parse_mode_kind(m.at("kind").get<std::string>());
      info.labels = m.at("labels").get<std::vector<std::string>>();
      space.modes.push_back(std::move(info));
    }
    space.slice_mode = doc.value("slice_mode", std::size_t{0});
    if (doc.contains("property_mode") && !doc["property_mode"].is_null()) {
      space.property_mode = doc["property_mode"].get<std::size_t>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed design space: ") + e.what());
  }
  space.validate();
  return space;
}

}  // namespace detail

std::string design_space_to_json(const DesignSpace& space) { return detail::design_space_json(space).dump(2) + "\n"; }

DesignSpace design_space_from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("design space is not valid JSON: ") + e.what());
  }
  return detail::design_space_from_json(doc);
}

void save_design_space(const std::filesystem::path& path, const DesignSpace& space) {
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw std::runtime_error("cannot open " + path.string() + " for writing");
  file << design_space_to_json(space);
  if (!file.flush()) throw std::runtime_error("failed writing " + path.string());
}

DesignSpace load_design_space(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << file.rdbuf();
  return design_space_from_json(buffer.str());
}

}  // namespace latticomp

#include "f2f/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "f2f/errors.hpp"
#include "f2f/parallel.hpp"
#include "f2f/spectral.hpp"

namespace f2f {

namespace {

// distinct labels ascending -> clip indices ascending within each class
std::map<std::size_t, std::vector<std::size_t>> group_by_class(
    const std::vector<std::size_t>& labels) {
  std::map<std::size_t, std::vector<std::size_t>> classes;
  for (std::size_t i = 0; i < labels.size(); ++i)
    classes[labels[i]].push_back(i);
  return classes;
}

void check_spectra(const PowerSpectrumSet& spectra) {
  if (spectra.power.rank() != 2)
    throw DimensionError("power spectrum set must be rank 2, got " +
                         shape_to_string(spectra.power.shape()));
  if (spectra.labels.size() != spectra.clips())
    throw DimensionError("label count " +
                         std::to_string(spectra.labels.size()) +
                         " does not match clip count " +
                         std::to_string(spectra.clips()));
  for (std::size_t i = 0; i < spectra.power.numel(); ++i) {
    const double v = spectra.power[i];
    if (!std::isfinite(v))
      throw ConfigError("spectral power contains a non-finite value");
    if (v < 0.0) throw ConfigError("spectral power contains a negative value");
  }
}

double sorted_sum(std::vector<double>& values) {
  std::sort(values.begin(), values.end());
  double acc = 0.0;
  for (double v : values) acc += v;
  return acc;
}

std::string format_cell(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

}  // namespace

Band band_of(std::size_t bin) {
  if (bin == 0) return Band::Dc;
  if (bin >= kMidBandFirst && bin <= kMidBandLast) return Band::Mid;
  return Band::High;
}

const char* band_name(Band band) {
  switch (band) {
    case Band::Dc:
      return "dc";
    case Band::Mid:
      return "mid";
    case Band::High:
      return "high";
  }
  return "";
}

Tensor pool_tokens(const Tensor& x, TokenPool pool) {
  if (x.rank() == 3) return x;
  if (x.rank() != 4)
    throw DimensionError("embedding batch must be rank 3 or 4, got " +
                         shape_to_string(x.shape()));
  const std::size_t b = x.dim(0), t = x.dim(1), n = x.dim(2), d = x.dim(3);
  Tensor out({b, t, d});
  if (pool == TokenPool::Cls) {
    for (std::size_t i = 0; i < b * t; ++i)
      for (std::size_t k = 0; k < d; ++k) out[i * d + k] = x[i * n * d + k];
    return out;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < b * t; ++i)
    for (std::size_t k = 0; k < d; ++k) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += x[(i * n + j) * d + k];
      out[i * d + k] = acc * inv_n;
    }
  return out;
}

PowerSpectrumSet spectral_power(const Tensor& x,
                                const std::vector<std::size_t>& labels,
                                TokenPool pool, double frame_rate_hz) {
  Tensor pooled = pool_tokens(x, pool);
  const std::size_t clips = pooled.dim(0), t = pooled.dim(1),
                    d = pooled.dim(2);
  if (t < 2)
    throw ConfigError("spectral power needs at least 2 frames, got " +
                      std::to_string(t));
  if (labels.size() != clips)
    throw DimensionError("label count " + std::to_string(labels.size()) +
                         " does not match clip count " +
                         std::to_string(clips));
  const std::size_t bins = t / 2 + 1;

  PowerSpectrumSet out;
  out.power = Tensor({clips, bins});
  out.labels = labels;
  out.frames = t;
  out.frame_rate_hz = frame_rate_hz;

  const double inv_d = 1.0 / static_cast<double>(d);
#pragma omp parallel for num_threads(par::threads()) schedule(static)
  for (std::ptrdiff_t ci = 0; ci < static_cast<std::ptrdiff_t>(clips); ++ci) {
    const std::size_t c = static_cast<std::size_t>(ci);
    double* row = out.power.data() + c * bins;
    for (std::size_t k = 0; k < d; ++k) {
      ComplexTensor line({t});
      for (std::size_t i = 0; i < t; ++i)
        line[i] = {pooled[(c * t + i) * d + k], 0.0};
      ComplexTensor spec = fft(line);
      for (std::size_t f = 0; f < bins; ++f) row[f] += std::norm(spec[f]);
    }
    for (std::size_t f = 0; f < bins; ++f) row[f] *= inv_d;
  }
  return out;
}

DiscriminabilityCurve discriminability(const PowerSpectrumSet& spectra,
                                       double epsilon) {
  check_spectra(spectra);
  auto classes = group_by_class(spectra.labels);
  if (classes.size() < 2)
    throw ConfigError("discriminability undefined for one class");

  const std::size_t bins = spectra.bins();
  const std::size_t clips = spectra.clips();
  DiscriminabilityCurve curve;
  curve.epsilon = epsilon;
  curve.between.assign(bins, 0.0);
  curve.within.assign(bins, 0.0);
  std::vector<double> d_raw(bins, 0.0);

#pragma omp parallel for num_threads(par::threads()) schedule(static)
  for (std::ptrdiff_t fi = 0; fi < static_cast<std::ptrdiff_t>(bins); ++fi) {
    const std::size_t f = static_cast<std::size_t>(fi);
    std::vector<double> class_means;
    std::vector<std::size_t> class_sizes;
    double total = 0.0;
    double within = 0.0;
    std::vector<double> bucket;
    for (const auto& [label, members] : classes) {
      bucket.clear();
      for (std::size_t i : members) bucket.push_back(spectra.power[i * bins + f]);
      const double class_sum = sorted_sum(bucket);
      const double mean = class_sum / static_cast<double>(members.size());
      class_means.push_back(mean);
      class_sizes.push_back(members.size());
      total += class_sum;

      bucket.clear();
      for (std::size_t i : members) {
        const double dev = spectra.power[i * bins + f] - mean;
        bucket.push_back(dev * dev);
      }
      within += sorted_sum(bucket);
    }
    const double grand_mean = total / static_cast<double>(clips);
    double between = 0.0;
    for (std::size_t c = 0; c < class_means.size(); ++c) {
      const double dev = class_means[c] - grand_mean;
      between += static_cast<double>(class_sizes[c]) * dev * dev;
    }
    curve.between[f] = between;
    curve.within[f] = within;
    d_raw[f] = between / (within + epsilon);
  }

  double total_d = 0.0;
  for (double v : d_raw) total_d += v;
  if (total_d == 0.0) {
    curve.d_normalized.assign(bins, 1.0 / static_cast<double>(bins));
    curve.degenerate_uniform = true;
  } else {
    curve.d_normalized.resize(bins);
    for (std::size_t f = 0; f < bins; ++f)
      curve.d_normalized[f] = d_raw[f] / total_d;
  }
  return curve;
}

namespace ref {

DiscriminabilityCurve discriminability(const PowerSpectrumSet& spectra,
                                       double epsilon) {
  check_spectra(spectra);
  auto classes = group_by_class(spectra.labels);
  if (classes.size() < 2)
    throw ConfigError("discriminability undefined for one class");

  const std::size_t bins = spectra.bins();
  const std::size_t clips = spectra.clips();
  DiscriminabilityCurve curve;
  curve.epsilon = epsilon;
  curve.between.assign(bins, 0.0);
  curve.within.assign(bins, 0.0);
  std::vector<double> d_raw(bins, 0.0);

  for (std::size_t f = 0; f < bins; ++f) {
    double mu = 0.0;
    for (std::size_t i = 0; i < clips; ++i) mu += spectra.power[i * bins + f];
    mu /= static_cast<double>(clips);

    std::map<std::size_t, double> mu_c;
    for (const auto& [label, members] : classes) {
      double acc = 0.0;
      for (std::size_t i : members) acc += spectra.power[i * bins + f];
      mu_c[label] = acc / static_cast<double>(members.size());
    }

    double between = 0.0;
    for (const auto& [label, members] : classes)
      between += static_cast<double>(members.size()) *
                 (mu_c[label] - mu) * (mu_c[label] - mu);

    double within = 0.0;
    for (const auto& [label, members] : classes)
      for (std::size_t i : members) {
        const double dev = spectra.power[i * bins + f] - mu_c[label];
        within += dev * dev;
      }

    curve.between[f] = between;
    curve.within[f] = within;
    d_raw[f] = between / (within + epsilon);
  }

  double total_d = 0.0;
  for (std::size_t f = 0; f < bins; ++f) total_d += d_raw[f];
  if (total_d == 0.0) {
    curve.d_normalized.assign(bins, 1.0 / static_cast<double>(bins));
    curve.degenerate_uniform = true;
  } else {
    curve.d_normalized.resize(bins);
    for (std::size_t f = 0; f < bins; ++f)
      curve.d_normalized[f] = d_raw[f] / total_d;
  }
  return curve;
}

}  // namespace ref

double band_mass(const DiscriminabilityCurve& curve, std::size_t first,
                 std::size_t last) {
  if (first > last) return 0.0;
  if (last >= curve.bins())
    throw ConfigError("band range [" + std::to_string(first) + ", " +
                      std::to_string(last) + "] outside [0, " +
                      std::to_string(curve.bins()) + ")");
  double acc = 0.0;
  for (std::size_t f = first; f <= last; ++f) acc += curve.d_normalized[f];
  return acc;
}

double bin_to_hz(std::size_t bin, std::size_t frames, double fps) {
  return static_cast<double>(bin) * fps / static_cast<double>(frames);
}

double compare_curves(const DiscriminabilityCurve& before,
                      const DiscriminabilityCurve& after, std::size_t first,
                      std::size_t last) {
  if (before.bins() != after.bins())
    throw DimensionError("curve bin counts differ: " +
                         std::to_string(before.bins()) + " vs " +
                         std::to_string(after.bins()));
  return band_mass(after, first, last) - band_mass(before, first, last);
}

void write_curve_csv(std::ostream& os, const DiscriminabilityCurve& curve,
                     std::size_t frames, double fps) {
  os << "bin,freq_hz,d_normalized,between,within,band\n";
  for (std::size_t f = 0; f < curve.bins(); ++f)
    os << f << ',' << format_cell(bin_to_hz(f, frames, fps)) << ','
       << format_cell(curve.d_normalized[f]) << ','
       << format_cell(curve.between[f]) << ',' << format_cell(curve.within[f])
       << ',' << band_name(band_of(f)) << '\n';
}

void write_curve_csv_file(const std::string& path,
                          const DiscriminabilityCurve& curve,
                          std::size_t frames, double fps) {
  std::ofstream os(path);
  if (!os) throw IoError(path + ": cannot open for writing");
  write_curve_csv(os, curve, frames, fps);
  if (!os) throw IoError(path + ": write failed");
}

void write_labels_csv(std::ostream& os,
                      const std::vector<std::size_t>& labels) {
  os << "clip_id,label\n";
  for (std::size_t i = 0; i < labels.size(); ++i)
    os << i << ',' << labels[i] << '\n';
}

void write_labels_csv_file(const std::string& path,
                           const std::vector<std::size_t>& labels) {
  std::ofstream os(path);
  if (!os) throw IoError(path + ": cannot open for writing");
  write_labels_csv(os, labels);
  if (!os) throw IoError(path + ": write failed");
}

std::vector<std::size_t> read_labels_csv(std::istream& is,
                                         const std::string& origin) {
  std::string line;
  if (!std::getline(is, line))
    throw IoError(origin + ": empty label file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "clip_id,label")
    throw IoError(origin + ": expected header 'clip_id,label', got '" + line +
                  "'");

  std::map<std::size_t, std::size_t> rows;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::size_t comma = line.find(',');
    if (comma == std::string::npos)
      throw IoError(origin + ": line " + std::to_string(line_no) +
                    " is not 'clip_id,label'");
    std::size_t id = 0, label = 0;
    try {
      id = std::stoull(line.substr(0, comma));
      label = std::stoull(line.substr(comma + 1));
    } catch (const std::exception&) {
      throw IoError(origin + ": line " + std::to_string(line_no) +
                    " is not numeric");
    }
    if (rows.count(id))
      throw IoError(origin + ": duplicate clip_id " + std::to_string(id));
    rows[id] = label;
  }
  if (rows.empty()) throw IoError(origin + ": no label rows");

  std::vector<std::size_t> labels(rows.size(), 0);
  for (const auto& [id, label] : rows) {
    if (id >= labels.size())
      throw IoError(origin + ": clip ids must cover 0.." +
                    std::to_string(labels.size() - 1) + ", found " +
                    std::to_string(id));
    labels[id] = label;
  }
  return labels;
}

std::vector<std::size_t> read_labels_csv_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError(path + ": cannot open");
  return read_labels_csv(is, path);
}

}  // namespace f2f

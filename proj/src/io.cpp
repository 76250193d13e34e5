#include "crftrack/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "crftrack/error.hpp"

namespace crftrack {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, sep)) out.push_back(trim(field));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string at_line(int line) { return "line " + std::to_string(line) + ": "; }

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  return out;
}

std::string shortest(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

double parse_double(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  double v = 0.0;
  const char* begin = t.data();
  const char* end = t.data() + t.size();
  if (!t.empty() && *begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (t.empty() || ec != std::errc() || ptr != end || !std::isfinite(v)) {
    fail(ErrorKind::kFormat, what + ": '" + text + "' is not a finite number");
  }
  return v;
}

long long parse_int(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  long long v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    // MOT files sometimes write integral fields as "1.0".
    const double d = parse_double(t, what);
    if (d != std::floor(d) || std::abs(d) > 9e15) {
      fail(ErrorKind::kFormat, what + ": '" + text + "' is not an integer");
    }
    return static_cast<long long>(d);
  }
  return v;
}

bool TrackFile::is_sorted_unique() const {
  for (std::size_t k = 1; k < records.size(); ++k) {
    const auto& a = records[k - 1];
    const auto& b = records[k];
    if (std::pair(a.frame, a.id) >= std::pair(b.frame, b.id)) return false;
  }
  return true;
}

void TrackFile::sort() {
  std::stable_sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
    return std::pair(a.frame, a.id) < std::pair(b.frame, b.id);
  });
}

std::map<int, std::vector<TrackRecord>> TrackFile::by_frame() const {
  std::map<int, std::vector<TrackRecord>> out;
  for (const auto& r : records) out[r.frame].push_back(r);
  return out;
}

int TrackFile::last_frame() const {
  int last = 0;
  for (const auto& r : records) last = std::max(last, r.frame);
  return last;
}

TrackFile parse_mot(std::istream& in) {
  TrackFile track;
  std::vector<int> line_of;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != 10) {
      fail(ErrorKind::kFormat, at_line(line_no) + "expected 10 fields, got " +
                                   std::to_string(fields.size()));
    }
    const std::string where = at_line(line_no);
    TrackRecord r;
    r.frame = static_cast<int>(parse_int(fields[0], where + "frame"));
    r.id = parse_int(fields[1], where + "id");
    r.box = {parse_double(fields[2], where + "left"), parse_double(fields[3], where + "top"),
             parse_double(fields[4], where + "width"), parse_double(fields[5], where + "height")};
    r.score = parse_double(fields[6], where + "score");
    for (int k = 0; k < 3; ++k) r.extra[k] = parse_double(fields[7 + k], where + "placeholder");
    if (r.frame < 1) fail(ErrorKind::kFormat, where + "frame must be >= 1");
    if (!(r.box.width > 0.0)) fail(ErrorKind::kFormat, where + "non-positive width");
    if (!(r.box.height > 0.0)) fail(ErrorKind::kFormat, where + "non-positive height");
    track.records.push_back(r);
    line_of.push_back(line_no);
  }

  std::vector<std::size_t> order(track.records.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ra = track.records[a];
    const auto& rb = track.records[b];
    return std::pair(ra.frame, ra.id) < std::pair(rb.frame, rb.id);
  });
  TrackFile sorted;
  sorted.records.reserve(order.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& r = track.records[order[k]];
    if (k > 0) {
      const auto& prev = sorted.records.back();
      if (prev.frame == r.frame && prev.id == r.id) {
        fail(ErrorKind::kFormat, at_line(line_of[order[k]]) + "duplicate (frame, id) = (" +
                                     std::to_string(r.frame) + ", " + std::to_string(r.id) + ")");
      }
    }
    sorted.records.push_back(r);
  }
  return sorted;
}

TrackFile read_mot(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_mot(in);
}

std::string format_fixed(double value, int places) {
  if (!std::isfinite(value)) fail(ErrorKind::kValidation, "cannot format a non-finite value");
  // glibc prints the exact binary expansion at this precision, so the
  // digits past `places` tell us precisely whether we sit on a tie.
  char buf[1024];
  std::snprintf(buf, sizeof(buf), "%.*f", places + 400, std::abs(value));
  std::string digits(buf);
  const auto dot = digits.find('.');
  std::string integral = digits.substr(0, dot);
  std::string frac = digits.substr(dot + 1);
  std::string kept = integral + frac.substr(0, static_cast<std::size_t>(places));
  const bool round_up = frac[static_cast<std::size_t>(places)] >= '5';
  if (round_up) {
    int k = static_cast<int>(kept.size()) - 1;
    while (k >= 0) {
      if (kept[static_cast<std::size_t>(k)] == '9') {
        kept[static_cast<std::size_t>(k)] = '0';
        --k;
      } else {
        ++kept[static_cast<std::size_t>(k)];
        break;
      }
    }
    if (k < 0) kept.insert(kept.begin(), '1');
  }
  const std::size_t int_len = kept.size() - static_cast<std::size_t>(places);
  std::string out = kept.substr(0, int_len);
  if (places > 0) out += "." + kept.substr(int_len);
  const bool is_zero = std::all_of(kept.begin(), kept.end(), [](char c) { return c == '0'; });
  if (value < 0.0 && !is_zero) out.insert(out.begin(), '-');
  return out;
}

void write_mot(std::ostream& out, const TrackFile& track) {
  for (const auto& r : track.records) {
    out << r.frame << ',' << r.id << ',' << format_fixed(r.box.left, 2) << ','
        << format_fixed(r.box.top, 2) << ',' << format_fixed(r.box.width, 2) << ','
        << format_fixed(r.box.height, 2) << ',' << format_fixed(r.score, 4) << ','
        << shortest(r.extra[0]) << ',' << shortest(r.extra[1]) << ',' << shortest(r.extra[2])
        << '\n';
  }
}

void write_mot(const std::filesystem::path& path, const TrackFile& track) {
  auto out = open_output(path);
  write_mot(out, track);
  if (!out) fail(ErrorKind::kIo, "write failed: " + path.string());
}

std::vector<KeyValue> parse_key_values(std::istream& in) {
  std::vector<KeyValue> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';' || t[0] == '[') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      fail(ErrorKind::kFormat, at_line(line_no) + "expected key=value");
    }
    out.push_back({trim(t.substr(0, eq)), trim(t.substr(eq + 1)), line_no});
  }
  return out;
}

SequenceInfo parse_seqinfo(std::istream& in) {
  SequenceInfo info;
  bool w = false, h = false, r = false;
  for (const KeyValue& kv : parse_key_values(in)) {
    const std::string where = at_line(kv.line) + kv.key;
    if (kv.key == "imWidth") {
      info.ctx.image_width = parse_double(kv.value, where);
      w = true;
    } else if (kv.key == "imHeight") {
      info.ctx.image_height = parse_double(kv.value, where);
      h = true;
    } else if (kv.key == "frameRate") {
      info.ctx.frame_rate = parse_double(kv.value, where);
      r = true;
    } else if (kv.key == "seqLength") {
      info.length = static_cast<int>(parse_int(kv.value, where));
    }
  }
  if (!w || !h || !r) fail(ErrorKind::kFormat, "seqinfo needs imWidth, imHeight and frameRate");
  info.ctx.validate();
  return info;
}

SequenceInfo read_seqinfo(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_seqinfo(in);
}

void write_seqinfo(std::ostream& out, const SequenceInfo& info) {
  out << "[Sequence]\n"
      << "imWidth=" << shortest(info.ctx.image_width) << '\n'
      << "imHeight=" << shortest(info.ctx.image_height) << '\n'
      << "frameRate=" << shortest(info.ctx.frame_rate) << '\n'
      << "seqLength=" << info.length << '\n';
}

ModelParams parse_params(std::istream& in) {
  ModelParams p;
  for (const KeyValue& kv : parse_key_values(in)) {
    const std::string where = at_line(kv.line) + kv.key;
    const auto& k = kv.key;
    if (k == "theta_u") {
      p.theta_u = parse_double(kv.value, where);
    } else if (k == "theta_b") {
      p.theta_b = parse_double(kv.value, where);
    } else if (k == "alpha1") {
      p.features.alpha1 = parse_double(kv.value, where);
    } else if (k == "alpha2") {
      p.features.alpha2 = parse_double(kv.value, where);
    } else if (k == "beta") {
      p.features.beta = parse_double(kv.value, where);
    } else if (k == "high_score_cut") {
      p.features.high_score_cut = parse_double(kv.value, where);
    } else if (k == "epsilon_dl") {
      p.features.epsilon_dl = parse_double(kv.value, where);
    } else if (k == "node_budget") {
      const long long m = parse_int(kv.value, where);
      if (m < 1) fail(ErrorKind::kFormat, where + " must be >= 1");
      p.node_budget = static_cast<std::size_t>(m);
    } else if (k == "pre_threshold") {
      p.pre_threshold = parse_double(kv.value, where);
    } else if (k == "short_threshold") {
      p.short_threshold = parse_double(kv.value, where);
    } else if (k == "min_crf_length") {
      const long long m = parse_int(kv.value, where);
      if (m < 3) fail(ErrorKind::kFormat, where + " must be >= 3");
      p.min_crf_length = static_cast<std::size_t>(m);
    } else if (k == "damping") {
      p.bp.damping = parse_double(kv.value, where);
    } else if (k == "max_iterations") {
      const long long m = parse_int(kv.value, where);
      if (m < 1) fail(ErrorKind::kFormat, where + " must be >= 1");
      p.bp.max_iterations = static_cast<std::size_t>(m);
    } else if (k == "tolerance") {
      p.bp.tolerance = parse_double(kv.value, where);
    } else {
      fail(ErrorKind::kFormat, at_line(kv.line) + "unknown parameter '" + k + "'");
    }
  }
  try {
    p.validate();
  } catch (const Error& e) {
    fail(ErrorKind::kFormat, std::string("invalid parameters: ") + e.what());
  }
  return p;
}

ModelParams read_params(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_params(in);
}

void write_params(std::ostream& out, const ModelParams& p) {
  out << "theta_u=" << shortest(p.theta_u) << '\n'
      << "theta_b=" << shortest(p.theta_b) << '\n'
      << "alpha1=" << shortest(p.features.alpha1) << '\n'
      << "alpha2=" << shortest(p.features.alpha2) << '\n'
      << "beta=" << shortest(p.features.beta) << '\n'
      << "high_score_cut=" << shortest(p.features.high_score_cut) << '\n'
      << "epsilon_dl=" << shortest(p.features.epsilon_dl) << '\n'
      << "node_budget=" << p.node_budget << '\n'
      << "pre_threshold=" << shortest(p.pre_threshold) << '\n'
      << "short_threshold=" << shortest(p.short_threshold) << '\n'
      << "min_crf_length=" << p.min_crf_length << '\n'
      << "damping=" << shortest(p.bp.damping) << '\n'
      << "max_iterations=" << p.bp.max_iterations << '\n'
      << "tolerance=" << shortest(p.bp.tolerance) << '\n';
}

}  // namespace crftrack

#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "crftrack/crf_model.hpp"
#include "crftrack/features.hpp"

namespace crftrack {

/// One MOT text line: frame, id, left, top, width, height, score and three
/// trailing placeholder fields.
struct TrackRecord {
  int frame = 1;
  TrackletId id = 0;
  Box box;
  double score = 1.0;
  std::array<double, 3> extra{-1.0, -1.0, -1.0};

  friend bool operator==(const TrackRecord&, const TrackRecord&) = default;
};

struct TrackFile {
  std::vector<TrackRecord> records;

  bool empty() const { return records.empty(); }
  /// True when records are strictly increasing in (frame, id).
  bool is_sorted_unique() const;
  void sort();
  /// Records grouped by frame, in frame order.
  std::map<int, std::vector<TrackRecord>> by_frame() const;
  int last_frame() const;

  friend bool operator==(const TrackFile&, const TrackFile&) = default;
};

/// Parses comma-separated MOT lines and returns records sorted by
/// (frame, id). Blank lines are skipped. Throws kFormat with the 1-based line
/// number on malformed input or duplicate (frame, id).
TrackFile parse_mot(std::istream& in);
TrackFile read_mot(const std::filesystem::path& path);

/// Pixels with 2 decimals, scores with 4, placeholders in shortest form.
void write_mot(std::ostream& out, const TrackFile& track);
void write_mot(const std::filesystem::path& path, const TrackFile& track);

/// Fixed-point formatting that rounds exact decimal ties away from zero.
/// Decisions are made on the exact binary value, so 1.005 (stored as
/// 1.00499999...) formats as "1.00" while 0.125 formats as "0.13".
std::string format_fixed(double value, int places);

/// Non-empty, non-comment `key=value` lines with their line numbers.
struct KeyValue {
  std::string key;
  std::string value;
  int line = 0;
};
std::vector<KeyValue> parse_key_values(std::istream& in);

double parse_double(const std::string& text, const std::string& what);
long long parse_int(const std::string& text, const std::string& what);

struct SequenceInfo {
  FrameContext ctx;
  int length = 0;
};

/// MOT seqinfo layout (imWidth, imHeight, frameRate, seqLength). Section
/// headers and unrelated keys such as `name` are ignored.
SequenceInfo parse_seqinfo(std::istream& in);
SequenceInfo read_seqinfo(const std::filesystem::path& path);
void write_seqinfo(std::ostream& out, const SequenceInfo& info);

/// Flat key=value parameter file. Missing keys keep their defaults; unknown
/// keys are a format error.
ModelParams parse_params(std::istream& in);
ModelParams read_params(const std::filesystem::path& path);
void write_params(std::ostream& out, const ModelParams& params);

}  // namespace crftrack

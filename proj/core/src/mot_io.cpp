#include "memosort/mot_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string_view>
#include <utility>

namespace memosort::io {
namespace {

[[noreturn]] void fail(const std::string& path, int line,
                       const std::string& what) {
  throw ParseError(path + " line " + std::to_string(line) + ": " + what);
}

std::string_view trimmed(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) {
    s.remove_suffix(1);
  }
  return s;
}

double parse_number(std::string_view field, const std::string& path, int line,
                    const char* name) {
  field = trimmed(field);
  double v = 0.0;
  const auto [end, ec] =
      std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || end != field.data() + field.size() ||
      field.empty()) {
    fail(path, line,
         std::string(name) + " is not a number: \"" + std::string(field) +
             "\"");
  }
  return v;
}

int parse_integer(std::string_view field, const std::string& path, int line,
                  const char* name) {
  const double v = parse_number(field, path, line, name);
  if (!std::isfinite(v) || v != std::rint(v) || std::abs(v) > 1e9) {
    fail(path, line, std::string(name) + " is not integral: \"" +
                         std::string(trimmed(field)) + "\"");
  }
  return static_cast<int>(v);
}

void append_number(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

void write_lines(std::vector<MotLine> lines, const std::string& path) {
  std::sort(lines.begin(), lines.end(), [](const MotLine& a, const MotLine& b) {
    return std::tie(a.frame, a.id, a.left, a.top) <
           std::tie(b.frame, b.id, b.left, b.top);
  });
  std::string text;
  for (const MotLine& l : lines) {
    text += std::to_string(l.frame);
    text += ',';
    text += std::to_string(l.id);
    for (double v : {l.left, l.top, l.w, l.h, l.score}) {
      text += ',';
      append_number(text, v);
    }
    text += ",-1,-1,-1\n";
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw ParseError(path + ": cannot open for writing");
  }
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) {
    throw ParseError(path + ": write failed");
  }
}

MotLine to_line(int frame, int id, const BBox& b, double score) {
  MotLine l;
  l.frame = frame;
  l.id = id;
  l.left = b.left();
  l.top = b.top();
  l.w = b.w();
  l.h = b.h();
  l.score = score;
  return l;
}

}  // namespace

std::vector<MotLine> read_mot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ParseError(path + ": cannot open");
  }
  std::vector<MotLine> lines;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') {
      raw.pop_back();
    }
    if (trimmed(raw).empty()) {
      continue;
    }
    std::vector<std::string_view> fields;
    std::string_view rest = raw;
    while (true) {
      const std::size_t comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) {
        break;
      }
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() != 10) {
      fail(path, line_no,
           "expected 10 comma-separated fields, got " +
               std::to_string(fields.size()));
    }
    MotLine l;
    l.frame = parse_integer(fields[0], path, line_no, "frame");
    l.id = parse_integer(fields[1], path, line_no, "id");
    l.left = parse_number(fields[2], path, line_no, "left");
    l.top = parse_number(fields[3], path, line_no, "top");
    l.w = parse_number(fields[4], path, line_no, "width");
    l.h = parse_number(fields[5], path, line_no, "height");
    l.score = parse_number(fields[6], path, line_no, "score");
    for (int k = 7; k < 10; ++k) {
      parse_number(fields[k], path, line_no, "placeholder");
    }
    if (l.frame < 1) {
      fail(path, line_no, "frame must be >= 1");
    }
    if (!std::isfinite(l.left) || !std::isfinite(l.top)) {
      fail(path, line_no, "box position must be finite");
    }
    if (!(l.w > 0.0) || !(l.h > 0.0) || !std::isfinite(l.w) ||
        !std::isfinite(l.h)) {
      fail(path, line_no, "box extents must be positive and finite");
    }
    if (!std::isfinite(l.score)) {
      fail(path, line_no, "score must be finite");
    }
    lines.push_back(l);
  }
  return lines;
}

void write_mot(const std::vector<MotLine>& lines, const std::string& path) {
  write_lines(lines, path);
}

std::vector<std::vector<Detection>> parse_detections(const std::string& path) {
  std::vector<MotLine> lines = read_mot(path);
  // Stable by frame: detections of one frame keep their file order, which is
  // what downstream tie-breaking sees.
  std::stable_sort(lines.begin(), lines.end(),
                   [](const MotLine& a, const MotLine& b) {
                     return a.frame < b.frame;
                   });
  std::vector<std::vector<Detection>> frames;
  for (const MotLine& l : lines) {
    if (l.id != -1) {
      throw ParseError(path + ": detection file has id " +
                       std::to_string(l.id) + " at frame " +
                       std::to_string(l.frame) + "; raw detections use -1");
    }
    if (l.score < 0.0 || l.score > 1.0) {
      throw ParseError(path + ": detection score outside [0, 1] at frame " +
                       std::to_string(l.frame));
    }
    if (frames.empty() || frames.back().front().frame != l.frame) {
      frames.emplace_back();
    }
    frames.back().push_back(Detection{
        BBox(l.left + l.w / 2.0, l.top + l.h / 2.0, l.w, l.h), l.score,
        l.frame});
  }
  return frames;
}

std::vector<TrackedBox> parse_tracked(const std::string& path) {
  std::vector<MotLine> lines = read_mot(path);
  std::stable_sort(lines.begin(), lines.end(),
                   [](const MotLine& a, const MotLine& b) {
                     return std::tie(a.frame, a.id) < std::tie(b.frame, b.id);
                   });
  std::vector<TrackedBox> rows;
  rows.reserve(lines.size());
  for (const MotLine& l : lines) {
    if (l.id < 1) {
      throw ParseError(path + ": identity file has id " + std::to_string(l.id) +
                       " at frame " + std::to_string(l.frame) +
                       "; tracked ids start at 1");
    }
    if (!rows.empty() && rows.back().frame == l.frame &&
        rows.back().id == l.id) {
      throw ParseError(path + ": duplicate id " + std::to_string(l.id) +
                       " at frame " + std::to_string(l.frame));
    }
    rows.push_back(TrackedBox{
        l.frame, l.id,
        BBox(l.left + l.w / 2.0, l.top + l.h / 2.0, l.w, l.h)});
  }
  return rows;
}

void write_results(const std::vector<TrackRow>& rows, const std::string& path) {
  std::vector<MotLine> lines;
  lines.reserve(rows.size());
  for (const TrackRow& r : rows) {
    lines.push_back(to_line(r.frame, r.id, r.box, r.score));
  }
  write_lines(std::move(lines), path);
}

void write_tracked(const std::vector<TrackedBox>& rows,
                   const std::string& path) {
  std::vector<MotLine> lines;
  lines.reserve(rows.size());
  for (const TrackedBox& r : rows) {
    lines.push_back(to_line(r.frame, r.id, r.box, 1.0));
  }
  write_lines(std::move(lines), path);
}

std::vector<MotLine> detection_lines(const synth::Scenario& sc) {
  std::vector<MotLine> lines;
  for (int f = 0; f < sc.frames; ++f) {
    for (const Detection& d : sc.detections[f]) {
      lines.push_back(to_line(f + 1, -1, d.box, d.score));
    }
  }
  return lines;
}

std::vector<MotLine> truth_lines(const synth::Scenario& sc) {
  std::vector<MotLine> lines;
  for (std::size_t t = 0; t < sc.truth.size(); ++t) {
    for (int f = 0; f < sc.frames; ++f) {
      lines.push_back(
          to_line(f + 1, static_cast<int>(t) + 1, sc.truth[t][f], 1.0));
    }
  }
  return lines;
}

}  // namespace memosort::io

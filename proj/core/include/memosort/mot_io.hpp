#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "memosort/detection.hpp"
#include "memosort/pipeline.hpp"
#include "memosort/synthgen.hpp"

// Plain-text detection and tracking files in the de-facto MOT layout:
//
//   frame,id,left,top,width,height,score,-1,-1,-1
//
// one line per box, frames 1-based, id -1 for raw detections. Boxes in files
// are top-left anchored; everything in memory is center anchored, and the
// readers/writers convert. Numbers are written in shortest-round-trip form,
// so write -> read reproduces every value bit for bit.
namespace memosort::io {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One file line, still top-left anchored. The three trailing placeholder
// fields are not stored: they are written as -1 and merely type-checked on
// read (real ground-truth files put class/visibility labels there).
struct MotLine {
  int frame = 1;
  int id = -1;
  double left = 0.0;
  double top = 0.0;
  double w = 0.0;
  double h = 0.0;
  double score = 1.0;
};

// Strict read: every non-blank line needs exactly ten comma-separated
// numeric fields, integral frame >= 1 and integral id, finite left/top,
// positive finite width/height. Errors read "<path> line <n>: <what>".
// Line order is preserved.
std::vector<MotLine> read_mot(const std::string& path);

// Writes sorted by (frame, id, left, top); write_mot(read_mot(p)) therefore
// canonicalizes order but never values. No trailing spaces, one trailing
// newline per line, empty input -> empty file.
void write_mot(const std::vector<MotLine>& lines, const std::string& path);

// Detection files: every id must be -1, every score in [0, 1]. Returns
// frame-ascending groups (frames with no detections are absent), each group
// in file order, boxes converted to center anchoring.
std::vector<std::vector<Detection>> parse_detections(const std::string& path);

// Ground-truth / tracker-output files: every id must be >= 1, duplicate
// (frame, id) pairs are rejected, scores are ignored. Sorted by (frame, id).
std::vector<TrackedBox> parse_tracked(const std::string& path);

// Tracker output with its scores, center -> top-left.
void write_results(const std::vector<TrackRow>& rows, const std::string& path);

// Identity-labeled boxes with score 1, center -> top-left.
void write_tracked(const std::vector<TrackedBox>& rows,
                   const std::string& path);

// Scenario exports, shifting the generator's 0-based frames to the file
// format's 1-based ones. Truth ids are target index + 1.
std::vector<MotLine> detection_lines(const synth::Scenario& sc);
std::vector<MotLine> truth_lines(const synth::Scenario& sc);

}  // namespace memosort::io

#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "cact/errors.hpp"

namespace cact {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

// Twice the signed area of (a, b, c); positive when CCW.
double orient2d(Vec2 a, Vec2 b, Vec2 c);

// Incircle determinant: positive when d lies strictly inside the
// circumcircle of the CCW triangle (a, b, c).
double incircle(Vec2 a, Vec2 b, Vec2 c, Vec2 d);

enum class EmbedMode { face, pose };

// One reference frame placed in the 2-D appearance plane.
struct EmbeddedFrame {
    int frame_id = 0;
    Vec2 coord;
};

// Delaunay mesh over embedded reference frames.
//
// `points` are deduplicated and sorted by (x, y, frame_id), so maps built
// from permuted inputs are identical. Triangles are CCW with the smallest
// vertex index first, sorted lexicographically. `adjacency[t][i]` is the
// triangle across the edge opposite vertex i of triangle t, -1 on the hull.
struct AppearanceMap {
    std::vector<EmbeddedFrame> points;
    std::vector<std::array<int, 3>> triangles;
    std::vector<std::array<int, 3>> adjacency;
};

struct ReferenceSet {
    std::vector<int> frame_ids;  // selection order, no duplicates
};

// Maps a semantic-label landmark set to an appearance-plane coordinate.
//
// face: expects the 68-point convention; returns (pitch, yaw) proxies in
// degrees. Yaw compares nose-tip distances to the image-left and
// image-right eye outer corners: atan2(dL - dR, dL + dR) * 180/pi. Pitch
// compares the nose-tip-to-eyeline and nose-tip-to-chin distances the same
// way. Both are monotone proxies, not solved 3-D pose.
//
// pose: expects >= 8 keypoints ordered head, neck, r_shoulder, l_shoulder,
// r_hip, l_hip, r_knee, l_knee; returns (torso tilt from vertical in
// degrees, hip-center x normalized to the keypoint bounding box).
Vec2 landmarks_to_coord(std::span<const Vec2> landmarks, EmbedMode mode);

// Incremental Bowyer-Watson with a super-triangle, then a legalization
// pass. Coordinates closer than 1e-9 are deduplicated keeping the lowest
// frame_id. Cocircular quads are resolved toward the lexicographically
// smallest vertex-index triple set.
AppearanceMap build_map(std::vector<EmbeddedFrame> frames);

// Straight walk from triangle 0; falls back to an exhaustive scan when the
// walk cycles. Returns the lowest-index triangle whose closed region
// contains q, or nullopt outside the hull.
std::optional<int> locate(const AppearanceMap& map, Vec2 q);

// Vertices of the containing triangle, then breadth-first expansion over
// edge-adjacent triangles; within each layer vertices are added by
// ascending distance to q (frame_id breaks ties). Outside the hull the
// walk is seeded from the triangle of the nearest hull edge.
ReferenceSet select_references(const AppearanceMap& map, Vec2 q, int want);

// One frame of semantic-label landmarks as read from a JSONL file.
struct LandmarkFrame {
    int frame_id = 0;
    std::vector<Vec2> points;
};

// JSON-lines ingestion: one {"frame": n, "points": [[x, y], ...]} per line.
std::vector<LandmarkFrame> load_landmarks_jsonl(const std::filesystem::path& path);

std::vector<EmbeddedFrame> embed_landmarks(const std::vector<LandmarkFrame>& frames,
                                           EmbedMode mode);

// Map export/import: {"points": [{"frame", "x", "y"}...],
// "triangles": [[i, j, k]...]}; adjacency is rebuilt on load.
void save_map_json(const std::filesystem::path& path, const AppearanceMap& map);
AppearanceMap load_map_json(const std::filesystem::path& path);

EmbedMode parse_embed_mode(const std::string& s);  // "face" | "pose"

}  // namespace cact

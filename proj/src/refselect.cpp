#include "cact/refselect.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <string>
#include <unordered_set>

#include <json.hpp>

namespace cact {

namespace {

constexpr double kDedupTol = 1e-9;   // coordinate merge distance
constexpr double kCocircTol = 1e-9;  // |incircle| below this is a tie

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

double dist2(Vec2 a, Vec2 b) {
    const double dx = a.x - b.x, dy = a.y - b.y;
    return dx * dx + dy * dy;
}

}  // namespace

double orient2d(Vec2 a, Vec2 b, Vec2 c) {
    return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

double incircle(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
    const double adx = a.x - d.x, ady = a.y - d.y;
    const double bdx = b.x - d.x, bdy = b.y - d.y;
    const double cdx = c.x - d.x, cdy = c.y - d.y;
    const double ad2 = adx * adx + ady * ady;
    const double bd2 = bdx * bdx + bdy * bdy;
    const double cd2 = cdx * cdx + cdy * cdy;
    return adx * (bdy * cd2 - cdy * bd2) - ady * (bdx * cd2 - cdx * bd2) +
           ad2 * (bdx * cdy - cdx * bdy);
}

// ---------------------------------------------------------------------------
// Landmark embeddings

namespace {

double point_line_distance(Vec2 p, Vec2 a, Vec2 b) {
    const double len2 = dist2(a, b);
    if (len2 == 0.0) return std::sqrt(dist2(p, a));
    return std::abs(orient2d(a, b, p)) / std::sqrt(len2);
}

// 68-point landmark indices used by the face embedding.
constexpr std::size_t kChin = 8;
constexpr std::size_t kNoseTip = 30;
constexpr std::size_t kEyeOuterA = 36;
constexpr std::size_t kEyeOuterB = 45;

Vec2 face_coord(std::span<const Vec2> lm) {
    if (lm.size() != 68)
        throw InsufficientLandmarksError(
            "face mode expects the 68-point landmark convention, got " +
            std::to_string(lm.size()) + " points");
    const Vec2 nose = lm[kNoseTip];
    const Vec2 chin = lm[kChin];
    Vec2 left = lm[kEyeOuterA], right = lm[kEyeOuterB];
    if (right.x < left.x) std::swap(left, right);  // image-left vs image-right

    const double d_left = std::sqrt(dist2(nose, left));
    const double d_right = std::sqrt(dist2(nose, right));
    const double yaw = std::atan2(d_left - d_right, d_left + d_right) * kRadToDeg;

    const double n_upper = point_line_distance(nose, lm[kEyeOuterA], lm[kEyeOuterB]);
    const double n_lower = std::sqrt(dist2(nose, chin));
    const double pitch = std::atan2(n_upper - n_lower, n_upper + n_lower) * kRadToDeg;

    return Vec2{pitch, yaw};
}

// Minimal 8-point skeleton: head, neck, r_shoulder, l_shoulder, r_hip,
// l_hip, r_knee, l_knee.
constexpr std::size_t kNeck = 1;
constexpr std::size_t kRHip = 4;
constexpr std::size_t kLHip = 5;

Vec2 pose_coord(std::span<const Vec2> lm) {
    if (lm.size() < 8)
        throw InsufficientLandmarksError("pose mode expects >= 8 keypoints, got " +
                                         std::to_string(lm.size()));
    const Vec2 neck = lm[kNeck];
    const Vec2 hip{(lm[kRHip].x + lm[kLHip].x) / 2.0,
                   (lm[kRHip].y + lm[kLHip].y) / 2.0};
    // 0 when the neck sits straight above the hip center (image y down).
    const double tilt = std::atan2(neck.x - hip.x, hip.y - neck.y) * kRadToDeg;

    double min_x = lm[0].x, max_x = lm[0].x;
    for (const Vec2& p : lm) {
        min_x = std::min(min_x, p.x);
        max_x = std::max(max_x, p.x);
    }
    const double norm_x =
        (max_x > min_x) ? (hip.x - min_x) / (max_x - min_x) : 0.5;
    return Vec2{tilt, norm_x};
}

}  // namespace

Vec2 landmarks_to_coord(std::span<const Vec2> landmarks, EmbedMode mode) {
    for (const Vec2& p : landmarks)
        if (!std::isfinite(p.x) || !std::isfinite(p.y))
            throw InsufficientLandmarksError("non-finite landmark coordinate");
    return mode == EmbedMode::face ? face_coord(landmarks) : pose_coord(landmarks);
}

// ---------------------------------------------------------------------------
// Delaunay construction

namespace {

struct Tri {
    std::array<int, 3> v;
};

std::array<int, 3> sorted3(std::array<int, 3> t) {
    std::sort(t.begin(), t.end());
    return t;
}

// Adjacency keyed on undirected edges; value: (triangle, edge position).
std::vector<std::array<int, 3>> build_adjacency(
    const std::vector<std::array<int, 3>>& tris) {
    std::map<std::pair<int, int>, std::vector<std::pair<int, int>>> edges;
    for (std::size_t t = 0; t < tris.size(); ++t) {
        for (int e = 0; e < 3; ++e) {
            int a = tris[t][(e + 1) % 3], b = tris[t][(e + 2) % 3];
            if (a > b) std::swap(a, b);
            edges[{a, b}].push_back({static_cast<int>(t), e});
        }
    }
    std::vector<std::array<int, 3>> adj(tris.size(), {-1, -1, -1});
    for (const auto& [edge, users] : edges) {
        if (users.size() > 2)
            throw DegenerateGeometryError("edge shared by more than 2 triangles");
        if (users.size() == 2) {
            adj[users[0].first][users[0].second] = users[1].first;
            adj[users[1].first][users[1].second] = users[0].first;
        }
    }
    return adj;
}

// Flip pass: repair any strict empty-circumcircle violation and settle
// cocircular quads on the lexicographically smallest triple set.
void legalize(std::vector<std::array<int, 3>>& tris,
              const std::vector<EmbeddedFrame>& pts) {
    auto at = [&](int i) { return pts[static_cast<std::size_t>(i)].coord; };
    bool changed = true;
    int guard = 0;
    while (changed && guard++ < 1000) {
        changed = false;
        auto adj = build_adjacency(tris);
        for (std::size_t t = 0; t < tris.size() && !changed; ++t) {
            for (int e = 0; e < 3 && !changed; ++e) {
                const int u = adj[t][e];
                if (u < 0 || static_cast<std::size_t>(u) < t) continue;
                const int c = tris[t][e];
                const int a = tris[t][(e + 1) % 3];
                const int b = tris[t][(e + 2) % 3];
                int d = -1;
                for (int k = 0; k < 3; ++k)
                    if (tris[u][k] != a && tris[u][k] != b) d = tris[u][k];
                const double det = incircle(at(c), at(a), at(b), at(d));
                bool flip = false;
                if (det > kCocircTol) {
                    flip = true;  // strict violation
                } else if (det >= -kCocircTol) {
                    const std::array<std::array<int, 3>, 2> cur{
                        sorted3({c, a, b}), sorted3({d, b, a})};
                    const std::array<std::array<int, 3>, 2> alt{
                        sorted3({c, a, d}), sorted3({c, d, b})};
                    auto key = [](std::array<std::array<int, 3>, 2> pr) {
                        if (pr[1] < pr[0]) std::swap(pr[0], pr[1]);
                        return pr;
                    };
                    flip = key(alt) < key(cur);
                }
                if (!flip) continue;
                // The flip is only valid on a strictly convex quad.
                if (orient2d(at(c), at(a), at(d)) <= 0.0) continue;
                if (orient2d(at(c), at(d), at(b)) <= 0.0) continue;
                tris[t] = {c, a, d};
                tris[u] = {c, d, b};
                changed = true;
            }
        }
    }
}

}  // namespace

AppearanceMap build_map(std::vector<EmbeddedFrame> frames) {
    for (const EmbeddedFrame& f : frames)
        if (!std::isfinite(f.coord.x) || !std::isfinite(f.coord.y))
            throw DegenerateGeometryError("non-finite coordinate for frame " +
                                          std::to_string(f.frame_id));

    // Dedup within tolerance, keeping the lowest frame_id per location.
    std::vector<EmbeddedFrame> pts;
    for (const EmbeddedFrame& f : frames) {
        bool merged = false;
        for (EmbeddedFrame& kept : pts) {
            if (std::abs(kept.coord.x - f.coord.x) <= kDedupTol &&
                std::abs(kept.coord.y - f.coord.y) <= kDedupTol) {
                kept.frame_id = std::min(kept.frame_id, f.frame_id);
                merged = true;
                break;
            }
        }
        if (!merged) pts.push_back(f);
    }
    if (pts.size() < 3)
        throw TooFewPointsError("triangulation needs >= 3 distinct points, got " +
                                std::to_string(pts.size()));

    std::sort(pts.begin(), pts.end(), [](const EmbeddedFrame& a, const EmbeddedFrame& b) {
        if (a.coord.x != b.coord.x) return a.coord.x < b.coord.x;
        if (a.coord.y != b.coord.y) return a.coord.y < b.coord.y;
        return a.frame_id < b.frame_id;
    });

    // Super-triangle comfortably containing the bounding box.
    double min_x = pts[0].coord.x, max_x = min_x;
    double min_y = pts[0].coord.y, max_y = min_y;
    for (const EmbeddedFrame& p : pts) {
        min_x = std::min(min_x, p.coord.x);
        max_x = std::max(max_x, p.coord.x);
        min_y = std::min(min_y, p.coord.y);
        max_y = std::max(max_y, p.coord.y);
    }
    const double cx = (min_x + max_x) / 2.0, cy = (min_y + max_y) / 2.0;
    const double span = std::max({max_x - min_x, max_y - min_y, 1.0});
    const int n = static_cast<int>(pts.size());
    std::vector<Vec2> coords(pts.size() + 3);
    for (std::size_t i = 0; i < pts.size(); ++i) coords[i] = pts[i].coord;
    coords[n + 0] = {cx - 64.0 * span, cy - 32.0 * span};
    coords[n + 1] = {cx + 64.0 * span, cy - 32.0 * span};
    coords[n + 2] = {cx, cy + 64.0 * span};

    std::vector<std::array<int, 3>> tris{{n, n + 1, n + 2}};  // CCW
    std::vector<char> bad;
    for (int i = 0; i < n; ++i) {
        const Vec2 q = coords[static_cast<std::size_t>(i)];
        bad.assign(tris.size(), 0);
        // Cavity: triangles whose circumcircle contains the new point.
        std::map<std::pair<int, int>, int> edge_count;
        bool any = false;
        for (std::size_t t = 0; t < tris.size(); ++t) {
            const auto& tv = tris[t];
            if (incircle(coords[tv[0]], coords[tv[1]], coords[tv[2]], q) > 0.0) {
                bad[t] = 1;
                any = true;
                for (int e = 0; e < 3; ++e) {
                    int a = tv[(e + 1) % 3], b = tv[(e + 2) % 3];
                    edge_count[{std::min(a, b), std::max(a, b)}]++;
                }
            }
        }
        if (!any) {
            // Point is on/outside every circumcircle (degenerate duplicates
            // are already removed, so treat as cocircular: pick the first
            // triangle containing it and split conservatively via its
            // circumcircle boundary). Fall back to the containing triangle.
            for (std::size_t t = 0; t < tris.size(); ++t) {
                const auto& tv = tris[t];
                if (orient2d(coords[tv[0]], coords[tv[1]], q) >= 0.0 &&
                    orient2d(coords[tv[1]], coords[tv[2]], q) >= 0.0 &&
                    orient2d(coords[tv[2]], coords[tv[0]], q) >= 0.0) {
                    bad[t] = 1;
                    for (int e = 0; e < 3; ++e) {
                        int a = tv[(e + 1) % 3], b = tv[(e + 2) % 3];
                        edge_count[{std::min(a, b), std::max(a, b)}]++;
                    }
                    break;
                }
            }
        }
        // Boundary = cavity edges seen exactly once.
        std::vector<std::array<int, 3>> next;
        for (std::size_t t = 0; t < tris.size(); ++t)
            if (!bad[t]) next.push_back(tris[t]);
        for (std::size_t t = 0; t < tris.size(); ++t) {
            if (!bad[t]) continue;
            const auto& tv = tris[t];
            for (int e = 0; e < 3; ++e) {
                const int a = tv[(e + 1) % 3], b = tv[(e + 2) % 3];
                if (edge_count[{std::min(a, b), std::max(a, b)}] != 1) continue;
                // (a, b) is CCW within the bad triangle, so (a, b, i) is CCW.
                next.push_back({a, b, i});
            }
        }
        tris = std::move(next);
    }

    // Drop triangles touching the super-triangle.
    std::vector<std::array<int, 3>> real;
    for (const auto& tv : tris)
        if (tv[0] < n && tv[1] < n && tv[2] < n) real.push_back(tv);
    if (real.empty())
        throw DegenerateGeometryError("all points are collinear");

    // Enforce CCW, legalize, canonicalize.
    for (auto& tv : real) {
        if (orient2d(coords[tv[0]], coords[tv[1]], coords[tv[2]]) < 0.0)
            std::swap(tv[1], tv[2]);
    }
    legalize(real, pts);
    for (auto& tv : real) {
        // Smallest vertex first, preserving orientation.
        const int k = static_cast<int>(
            std::min_element(tv.begin(), tv.end()) - tv.begin());
        std::rotate(tv.begin(), tv.begin() + k, tv.end());
    }
    std::sort(real.begin(), real.end());

    AppearanceMap map;
    map.points = std::move(pts);
    map.triangles = std::move(real);
    map.adjacency = build_adjacency(map.triangles);
    return map;
}

// ---------------------------------------------------------------------------
// Queries

namespace {

bool contains(const AppearanceMap& map, int t, Vec2 q) {
    const auto& tv = map.triangles[static_cast<std::size_t>(t)];
    const Vec2 a = map.points[tv[0]].coord;
    const Vec2 b = map.points[tv[1]].coord;
    const Vec2 c = map.points[tv[2]].coord;
    return orient2d(a, b, q) >= 0.0 && orient2d(b, c, q) >= 0.0 &&
           orient2d(c, a, q) >= 0.0;
}

std::optional<int> scan_locate(const AppearanceMap& map, Vec2 q) {
    for (std::size_t t = 0; t < map.triangles.size(); ++t)
        if (contains(map, static_cast<int>(t), q)) return static_cast<int>(t);
    return std::nullopt;
}

}  // namespace

std::optional<int> locate(const AppearanceMap& map, Vec2 q) {
    if (map.triangles.empty()) return std::nullopt;
    int t = 0;
    std::size_t steps = 0;
    const std::size_t max_steps = 2 * map.triangles.size() + 16;
    while (steps++ < max_steps) {
        const auto& tv = map.triangles[static_cast<std::size_t>(t)];
        bool boundary = false;
        int cross = -2;
        for (int i = 0; i < 3 && cross == -2; ++i) {
            const Vec2 a = map.points[tv[(i + 1) % 3]].coord;
            const Vec2 b = map.points[tv[(i + 2) % 3]].coord;
            const double o = orient2d(a, b, q);
            if (o < 0.0)
                cross = map.adjacency[static_cast<std::size_t>(t)][i];
            else if (o == 0.0)
                boundary = true;
        }
        if (cross == -2) {
            // Contained. On a boundary the lowest containing index wins.
            if (boundary) return scan_locate(map, q);
            return t;
        }
        if (cross == -1) return std::nullopt;  // crossed a hull edge
        t = cross;
    }
    return scan_locate(map, q);  // walk cycled on degenerate geometry
}

namespace {

double point_segment_dist2(Vec2 p, Vec2 a, Vec2 b) {
    const double vx = b.x - a.x, vy = b.y - a.y;
    const double len2 = vx * vx + vy * vy;
    double t = len2 > 0.0 ? ((p.x - a.x) * vx + (p.y - a.y) * vy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return dist2(p, Vec2{a.x + t * vx, a.y + t * vy});
}

int nearest_hull_triangle(const AppearanceMap& map, Vec2 q) {
    double best = std::numeric_limits<double>::infinity();
    int best_t = 0;
    for (std::size_t t = 0; t < map.triangles.size(); ++t) {
        for (int e = 0; e < 3; ++e) {
            if (map.adjacency[t][e] != -1) continue;
            const auto& tv = map.triangles[t];
            const Vec2 a = map.points[tv[(e + 1) % 3]].coord;
            const Vec2 b = map.points[tv[(e + 2) % 3]].coord;
            const double d = point_segment_dist2(q, a, b);
            if (d < best) {
                best = d;
                best_t = static_cast<int>(t);
            }
        }
    }
    return best_t;
}

}  // namespace

ReferenceSet select_references(const AppearanceMap& map, Vec2 q, int want) {
    if (want < 3) throw Error("select_references: want must be >= 3");
    if (map.triangles.empty())
        throw TooFewPointsError("select_references: empty appearance map");

    const std::optional<int> hit = locate(map, q);
    const int seed = hit ? *hit : nearest_hull_triangle(map, q);

    ReferenceSet result;
    std::unordered_set<int> seen_points;
    std::vector<char> seen_tri(map.triangles.size(), 0);
    std::vector<int> layer{seed};
    seen_tri[static_cast<std::size_t>(seed)] = 1;

    while (!layer.empty() &&
           result.frame_ids.size() < static_cast<std::size_t>(want)) {
        // Unseen vertices of this layer, nearest to q first.
        std::vector<std::pair<double, int>> cand;  // (dist2, point index)
        for (int t : layer) {
            for (int v : map.triangles[static_cast<std::size_t>(t)]) {
                if (seen_points.insert(v).second)
                    cand.push_back({dist2(q, map.points[v].coord), v});
            }
        }
        std::sort(cand.begin(), cand.end(), [&](const auto& l, const auto& r) {
            if (l.first != r.first) return l.first < r.first;
            return map.points[l.second].frame_id < map.points[r.second].frame_id;
        });
        for (const auto& [d, v] : cand) {
            result.frame_ids.push_back(map.points[v].frame_id);
            if (result.frame_ids.size() == static_cast<std::size_t>(want)) break;
        }

        std::vector<int> next;
        for (int t : layer) {
            for (int e = 0; e < 3; ++e) {
                const int u = map.adjacency[static_cast<std::size_t>(t)][e];
                if (u >= 0 && !seen_tri[static_cast<std::size_t>(u)]) {
                    seen_tri[static_cast<std::size_t>(u)] = 1;
                    next.push_back(u);
                }
            }
        }
        std::sort(next.begin(), next.end());
        layer = std::move(next);
    }
    return result;
}

// ---------------------------------------------------------------------------
// File interfaces

std::vector<LandmarkFrame> load_landmarks_jsonl(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw FormatError("cannot open: " + path.string());
    std::vector<LandmarkFrame> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
            LandmarkFrame lf;
            lf.frame_id = j.at("frame").get<int>();
            for (const auto& p : j.at("points")) {
                if (!p.is_array() || p.size() != 2)
                    throw FormatError(path.string() + ":" + std::to_string(lineno) +
                                      ": point must be [x, y]");
                lf.points.push_back({p[0].get<double>(), p[1].get<double>()});
            }
            out.push_back(std::move(lf));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) +
                              ": " + e.what());
        }
    }
    return out;
}

std::vector<EmbeddedFrame> embed_landmarks(const std::vector<LandmarkFrame>& frames,
                                           EmbedMode mode) {
    std::vector<EmbeddedFrame> out;
    out.reserve(frames.size());
    for (const LandmarkFrame& f : frames)
        out.push_back({f.frame_id, landmarks_to_coord(f.points, mode)});
    return out;
}

void save_map_json(const std::filesystem::path& path, const AppearanceMap& map) {
    nlohmann::json pts = nlohmann::json::array();
    for (const EmbeddedFrame& p : map.points)
        pts.push_back({{"frame", p.frame_id}, {"x", p.coord.x}, {"y", p.coord.y}});
    nlohmann::json tris = nlohmann::json::array();
    for (const auto& t : map.triangles) tris.push_back({t[0], t[1], t[2]});
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw FormatError("cannot open for writing: " + path.string());
    f << nlohmann::json{{"points", pts}, {"triangles", tris}}.dump(2) << "\n";
}

AppearanceMap load_map_json(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw FormatError("cannot open: " + path.string());
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": invalid JSON: " + e.what());
    }
    AppearanceMap map;
    try {
        for (const auto& p : j.at("points"))
            map.points.push_back({p.at("frame").get<int>(),
                                  {p.at("x").get<double>(), p.at("y").get<double>()}});
        for (const auto& t : j.at("triangles")) {
            if (!t.is_array() || t.size() != 3)
                throw FormatError(path.string() + ": triangle must be [i, j, k]");
            map.triangles.push_back(
                {t[0].get<int>(), t[1].get<int>(), t[2].get<int>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": bad appearance map: " + e.what());
    }
    const int n = static_cast<int>(map.points.size());
    for (auto& tv : map.triangles) {
        for (int v : tv)
            if (v < 0 || v >= n)
                throw FormatError(path.string() + ": triangle index " +
                                  std::to_string(v) + " out of range");
        const double o = orient2d(map.points[tv[0]].coord, map.points[tv[1]].coord,
                                  map.points[tv[2]].coord);
        if (o == 0.0)
            throw FormatError(path.string() + ": zero-area triangle");
        if (o < 0.0) std::swap(tv[1], tv[2]);
    }
    map.adjacency = build_adjacency(map.triangles);
    return map;
}

EmbedMode parse_embed_mode(const std::string& s) {
    if (s == "face") return EmbedMode::face;
    if (s == "pose") return EmbedMode::pose;
    throw FormatError("unknown embed mode '" + s + "' (expected face or pose)");
}

}  // namespace cact

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bdet/boxes.hpp"
#include "bdet/tensor.hpp"

namespace bdet {

// Shape classes of the synthetic set.
inline constexpr int kClassRect = 0;
inline constexpr int kClassEllipse = 1;

struct DatasetRecord {
  std::string image_file;  // relative to the dataset directory
  std::vector<GtObject> objects;
};

struct Dataset {
  int image_size = 0;
  int classes = 2;
  std::vector<DatasetRecord> records;
  std::vector<Tensor4f> images;  // (1, 1, S, S) each

  std::size_t size() const { return records.size(); }
};

// Tight box and (left, top, right, bottom) extreme points of a rectangle.
// Every border point of a rectangle lies on the box; side midpoints are the
// conventional representatives.
GtObject rect_object(float x0, float y0, float x1, float y1);

// Ellipse extremes sit at the axis endpoints.
GtObject ellipse_object(float cx, float cy, float rx, float ry);

// Noise background plus 1-3 non-degenerate shapes per image (axis-aligned
// rectangles are class 0, ellipses class 1), with exact boxes and extreme
// points. Bitwise deterministic per seed.
Dataset generate_synthetic_dataset(std::uint64_t seed, int n_images,
                                   int image_size, int classes = 2);

// Directory layout: images/*.tns plus manifest.json.
void save_dataset(const Dataset& ds, const std::string& dir);
Dataset load_dataset(const std::string& dir);

}  // namespace bdet

#include "bdet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "bdet/io.hpp"
#include "bdet/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace bdet {

GtObject rect_object(float x0, float y0, float x1, float y1) {
  GtObject o;
  o.cls = kClassRect;
  o.box = {x0, y0, x1, y1};
  const float mx = 0.5f * (x0 + x1);
  const float my = 0.5f * (y0 + y1);
  o.extremes = {{{x0, my}, {mx, y0}, {x1, my}, {mx, y1}}};
  return o;
}

GtObject ellipse_object(float cx, float cy, float rx, float ry) {
  GtObject o;
  o.cls = kClassEllipse;
  o.box = {cx - rx, cy - ry, cx + rx, cy + ry};
  o.extremes = {{{cx - rx, cy}, {cx, cy - ry}, {cx + rx, cy}, {cx, cy + ry}}};
  return o;
}

namespace {

struct Shape {
  GtObject gt;
  float fill = 0.0f;
  // ellipse geometry, unused for rectangles
  float cx = 0, cy = 0, rx = 0, ry = 0;
};

bool inside(const Shape& s, float px, float py) {
  if (s.gt.cls == kClassRect) {
    return px >= s.gt.box[0] && px <= s.gt.box[2] && py >= s.gt.box[1] &&
           py <= s.gt.box[3];
  }
  const float dx = (px - s.cx) / s.rx;
  const float dy = (py - s.cy) / s.ry;
  return dx * dx + dy * dy <= 1.0f;
}

Shape sample_shape(Rng& rng, int image_size, int classes) {
  const float margin = 1.0f;
  const float size = static_cast<float>(image_size);
  Shape s;
  const int cls = classes > 1 ? rng.uniform_int(classes) : 0;
  if (cls == kClassRect) {
    const float w = static_cast<float>(rng.uniform(10.0, 0.55 * size));
    const float h = static_cast<float>(rng.uniform(10.0, 0.55 * size));
    const float x0 =
        static_cast<float>(rng.uniform(margin, size - margin - w));
    const float y0 =
        static_cast<float>(rng.uniform(margin, size - margin - h));
    s.gt = rect_object(x0, y0, x0 + w, y0 + h);
  } else {
    const float rx = static_cast<float>(rng.uniform(6.0, 0.28 * size));
    const float ry = static_cast<float>(rng.uniform(6.0, 0.28 * size));
    const float cx =
        static_cast<float>(rng.uniform(margin + rx, size - margin - rx));
    const float cy =
        static_cast<float>(rng.uniform(margin + ry, size - margin - ry));
    s.cx = cx;
    s.cy = cy;
    s.rx = rx;
    s.ry = ry;
    s.gt = ellipse_object(cx, cy, rx, ry);
  }
  s.fill = static_cast<float>(rng.uniform(0.55, 0.95));
  return s;
}

}  // namespace

Dataset generate_synthetic_dataset(std::uint64_t seed, int n_images,
                                   int image_size, int classes) {
  if (image_size < 32)
    throw std::invalid_argument("generate_synthetic_dataset: image_size < 32");
  if (classes < 1 || classes > 2)
    throw std::invalid_argument(
        "generate_synthetic_dataset: classes must be 1 or 2");
  Dataset ds;
  ds.image_size = image_size;
  ds.classes = classes;
  Rng rng(seed);

  for (int n = 0; n < n_images; ++n) {
    Tensor4f img(1, 1, image_size, image_size);
    for (int y = 0; y < image_size; ++y)
      for (int x = 0; x < image_size; ++x)
        img.at(0, 0, y, x) = static_cast<float>(rng.uniform(0.0, 0.25));

    const int n_shapes = 1 + rng.uniform_int(3);
    std::vector<Shape> shapes;
    for (int k = 0; k < n_shapes; ++k) {
      Shape cand = sample_shape(rng, image_size, classes);
      // a few tries to keep heavy overlap rare
      for (int attempt = 0; attempt < 8; ++attempt) {
        float worst = 0.0f;
        for (const Shape& other : shapes)
          worst = std::max(worst, box_iou(cand.gt.box, other.gt.box));
        if (worst < 0.25f) break;
        cand = sample_shape(rng, image_size, classes);
      }
      shapes.push_back(cand);
    }

    for (int y = 0; y < image_size; ++y) {
      for (int x = 0; x < image_size; ++x) {
        const float px = static_cast<float>(x) + 0.5f;
        const float py = static_cast<float>(y) + 0.5f;
        for (const Shape& s : shapes)
          if (inside(s, px, py)) img.at(0, 0, y, x) = s.fill;
      }
    }
    // mild pixel noise on top of everything
    for (int y = 0; y < image_size; ++y)
      for (int x = 0; x < image_size; ++x)
        img.at(0, 0, y, x) += static_cast<float>(rng.normal() * 0.02);

    DatasetRecord rec;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "images/img_%05d.tns", n);
    rec.image_file = buf;
    for (const Shape& s : shapes) rec.objects.push_back(s.gt);
    ds.records.push_back(std::move(rec));
    ds.images.push_back(std::move(img));
  }
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& dir) {
  fs::create_directories(fs::path(dir) / "images");
  json manifest;
  manifest["image_size"] = ds.image_size;
  manifest["classes"] = ds.classes;
  json records = json::array();
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const DatasetRecord& rec = ds.records[i];
    save_tensor(ds.images[i], (fs::path(dir) / rec.image_file).string());
    json jr;
    jr["image"] = rec.image_file;
    json objs = json::array();
    for (const GtObject& o : rec.objects) {
      json jo;
      jo["class"] = o.cls;
      jo["box"] = {o.box[0], o.box[1], o.box[2], o.box[3]};
      json ext = json::array();
      for (const auto& e : o.extremes) ext.push_back({e[0], e[1]});
      jo["extremes"] = ext;
      objs.push_back(std::move(jo));
    }
    jr["objects"] = std::move(objs);
    records.push_back(std::move(jr));
  }
  manifest["records"] = std::move(records);
  std::ofstream os(fs::path(dir) / "manifest.json");
  if (!os) throw std::runtime_error("cannot write manifest in " + dir);
  os << manifest.dump(2) << "\n";
}

Dataset load_dataset(const std::string& dir) {
  std::ifstream is(fs::path(dir) / "manifest.json");
  if (!is) throw std::runtime_error("dataset manifest not found in " + dir);
  json manifest = json::parse(is);
  Dataset ds;
  ds.image_size = manifest.at("image_size").get<int>();
  ds.classes = manifest.at("classes").get<int>();
  for (const json& jr : manifest.at("records")) {
    DatasetRecord rec;
    rec.image_file = jr.at("image").get<std::string>();
    for (const json& jo : jr.at("objects")) {
      GtObject o;
      o.cls = jo.at("class").get<int>();
      const auto& jb = jo.at("box");
      o.box = {jb[0].get<float>(), jb[1].get<float>(), jb[2].get<float>(),
               jb[3].get<float>()};
      const auto& je = jo.at("extremes");
      for (int k = 0; k < 4; ++k)
        o.extremes[k] = {je[k][0].get<float>(), je[k][1].get<float>()};
      rec.objects.push_back(o);
    }
    ds.images.push_back(
        load_tensor((fs::path(dir) / rec.image_file).string()));
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

}  // namespace bdet

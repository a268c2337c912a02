// Python bindings for the core operations: geometry, heatmap
// post-processing, the synthetic world, losses, and model inference.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "json.hpp"
#include "placekit/config.hpp"
#include "placekit/trainer.hpp"

namespace py = pybind11;
using namespace placekit;

namespace {

py::array_t<float> heatmap_to_array(const Heatmap3D& h) {
  py::array_t<float> a({h.dims.h, h.dims.w, h.channels()});
  std::copy(h.data.begin(), h.data.end(), a.mutable_data());
  return a;
}

Heatmap3D heatmap_from_array(py::array_t<float, py::array::c_style> a,
                             const ScaleGrid& grid) {
  if (a.ndim() != 3) throw ShapeMismatch("heatmap array must be (h, w, c)");
  if (a.shape(2) != grid.channels())
    throw ShapeMismatch("channel count does not match the scale grid");
  Heatmap3D h(ImageDims{int(a.shape(1)), int(a.shape(0))}, grid);
  std::copy(a.data(), a.data() + a.size(), h.data.begin());
  return h;
}

py::array_t<std::uint8_t> image_to_array(const ImageRGB& img) {
  py::array_t<std::uint8_t> a({img.h, img.w, 3});
  std::copy(img.px.begin(), img.px.end(), a.mutable_data());
  return a;
}

ImageRGB image_from_array(py::array_t<std::uint8_t, py::array::c_style> a) {
  if (a.ndim() != 3 || a.shape(2) != 3)
    throw ShapeMismatch("image array must be (h, w, 3) uint8");
  ImageRGB img(int(a.shape(1)), int(a.shape(0)));
  std::copy(a.data(), a.data() + a.size(), img.px.begin());
  return img;
}

PlacementBox box_from_tuple(const py::tuple& t) {
  if (t.size() != 4) throw ShapeMismatch("box must be (l, t, w, h)");
  return PlacementBox{t[0].cast<double>(), t[1].cast<double>(),
                      t[2].cast<double>(), t[3].cast<double>()};
}

py::tuple box_to_tuple(const PlacementBox& b) {
  return py::make_tuple(b.l, b.t, b.w, b.h);
}

// Inference-oriented wrapper around a trained checkpoint.
class Predictor {
 public:
  explicit Predictor(const std::string& path)
      : grid_(ScaleGrid::make_default()), net_(load(path)) {}

  py::dict predict(py::array_t<std::uint8_t, py::array::c_style> bg_arr,
                   py::array_t<std::uint8_t, py::array::c_style> obj_arr,
                   int k) {
    ImageRGB bg = image_from_array(bg_arr);
    ImageRGB obj = image_from_array(obj_arr);
    double aspect = double(obj.w) / double(obj.h);
    Tensor bg_t = image_to_tensor<float>(bg);
    Tensor obj_t = image_to_tensor<float>(
        PlacementNet::preprocess_object(obj, net_.config().input_size));
    std::int64_t before = net_.forward_count();
    Heatmap3D h = heatmap_from_tensor(net_.forward(bg_t, obj_t), grid_);
    py::list boxes, scores;
    for (const auto& [box, score] : top_k_boxes(normalize(h), k, aspect)) {
      boxes.append(box_to_tuple(box));
      scores.append(score);
    }
    py::dict out;
    out["heatmap"] = heatmap_to_array(h);
    out["boxes"] = boxes;
    out["scores"] = scores;
    out["forward_passes"] = net_.forward_count() - before;
    return out;
  }

  py::array_t<float> attention_map(
      py::array_t<std::uint8_t, py::array::c_style> bg_arr,
      py::array_t<std::uint8_t, py::array::c_style> obj_arr, int layer,
      int head) {
    ImageRGB bg = image_from_array(bg_arr);
    ImageRGB obj = image_from_array(obj_arr);
    Tensor bg_t = image_to_tensor<float>(bg);
    Tensor obj_t = image_to_tensor<float>(
        PlacementNet::preprocess_object(obj, net_.config().input_size));
    Map2D m = net_.attention_map(bg_t, obj_t, layer, head);
    py::array_t<float> a({m.h, m.w});
    std::copy(m.data.begin(), m.data.end(), a.mutable_data());
    return a;
  }

  int input_size() const { return net_.config().input_size; }
  ScaleGrid grid() const { return grid_; }

 private:
  PlacementNet load(const std::string& path) {
    CheckpointData ck = read_checkpoint(path);
    nlohmann::json cfg = nlohmann::json::parse(ck.config_json);
    ModelConfig mc = model_config_from_json(cfg.at("model"));
    if (cfg.contains("grid"))
      grid_.values = cfg.at("grid").get<std::vector<double>>();
    PlacementNet net(mc, 0);
    unpack_params(ck, net.parameters());
    return net;
  }

  ScaleGrid grid_;
  PlacementNet net_;
};

Scene scene_from_dataset(const Dataset& ds, std::size_t i) {
  return ds.scenes.at(i);
}

}  // namespace

PYBIND11_MODULE(_placekit, m) {
  m.doc() = "dense object placement toolkit";

  py::class_<ScaleGrid>(m, "ScaleGrid")
      .def(py::init([]() { return ScaleGrid::make_default(); }))
      .def_static("make_default", &ScaleGrid::make_default)
      .def_readwrite("values", &ScaleGrid::values)
      .def("nearest", &ScaleGrid::nearest)
      .def("channels", &ScaleGrid::channels);

  m.def("scale_of_box", [](const py::tuple& box, int w, int h) {
    return scale_of_box(box_from_tuple(box), ImageDims{w, h});
  });
  m.def("box_from_index",
        [](int x, int y, int z, const ScaleGrid& g, int w, int h,
           double aspect) {
          return box_to_tuple(
              box_from_index(GridIndex{x, y, z}, g, ImageDims{w, h}, aspect));
        });
  m.def("index_from_box",
        [](const py::tuple& box, const ScaleGrid& g, int w, int h) {
          GridIndex i = index_from_box(box_from_tuple(box), g, ImageDims{w, h});
          return py::make_tuple(i.x, i.y, i.z);
        });
  m.def("iou", [](const py::tuple& a, const py::tuple& b) {
    return iou(box_from_tuple(a), box_from_tuple(b));
  });
  m.def("clip_box", [](const py::tuple& box, int w, int h) {
    return box_to_tuple(clip_box(box_from_tuple(box), ImageDims{w, h}));
  });

  m.def("normalize",
        [](py::array_t<float, py::array::c_style> h, const ScaleGrid& g) {
          return heatmap_to_array(normalize(heatmap_from_array(h, g)));
        });
  m.def("top_k_boxes",
        [](py::array_t<float, py::array::c_style> h, const ScaleGrid& g,
           int k, double aspect) {
          auto boxes = top_k_boxes(heatmap_from_array(h, g), k, aspect);
          py::list out;
          for (const auto& [box, score] : boxes)
            out.append(py::make_tuple(box_to_tuple(box), score));
          return out;
        });
  m.def("slice_fixed_scale",
        [](py::array_t<float, py::array::c_style> h, const ScaleGrid& g,
           int z) {
          Map2D map = slice_fixed_scale(heatmap_from_array(h, g), z);
          py::array_t<float> a({map.h, map.w});
          std::copy(map.data.begin(), map.data.end(), a.mutable_data());
          return a;
        });
  m.def("slice_fixed_location",
        [](py::array_t<float, py::array::c_style> h, const ScaleGrid& g,
           int x, int y) {
          ScaleScores s = slice_fixed_location(heatmap_from_array(h, g), x, y);
          return py::make_tuple(s.scores, s.argmax);
        });

  m.def("sparse_contrastive_loss",
        [](py::array_t<double, py::array::c_style> h, int x_gt, int y_gt,
           int z_gt, int radius_xy, int radius_z, double margin) {
          if (h.ndim() != 3) throw ShapeMismatch("heatmap must be (h, w, c)");
          TensorD t({int(h.shape(0)), int(h.shape(1)), int(h.shape(2))});
          std::copy(h.data(), h.data() + h.size(), t.data.begin());
          GridIndex gt{x_gt, y_gt, z_gt};
          MarginSpec spec{radius_xy, radius_xy, radius_z, margin};
          TensorD m2 = margin_matrix<double>(
              gt, ImageDims{int(h.shape(1)), int(h.shape(0))},
              int(h.shape(2)), spec);
          return py::make_tuple(sparse_contrastive(t, m2, gt),
                                range_loss(t, gt),
                                total_loss(t, m2, gt));
        });

  py::class_<OracleParams>(m, "OracleParams")
      .def(py::init<>())
      .def_readwrite("horizon_frac_lo", &OracleParams::horizon_frac_lo)
      .def_readwrite("horizon_frac_hi", &OracleParams::horizon_frac_hi)
      .def_readwrite("s_min", &OracleParams::s_min)
      .def_readwrite("s_max", &OracleParams::s_max)
      .def_readwrite("tau_s", &OracleParams::tau_s)
      .def_readwrite("flyer_lo", &OracleParams::flyer_lo)
      .def_readwrite("flyer_hi", &OracleParams::flyer_hi)
      .def_readwrite("max_obstacle_iou", &OracleParams::max_obstacle_iou)
      .def_readwrite("flyer_frac", &OracleParams::flyer_frac)
      .def_readwrite("bimodal", &OracleParams::bimodal);

  py::class_<Scene>(m, "Scene")
      .def_property_readonly(
          "bg", [](const Scene& s) { return image_to_array(s.bg); })
      .def_property_readonly(
          "obj", [](const Scene& s) { return image_to_array(s.obj); })
      .def_property_readonly(
          "gt_index",
          [](const Scene& s) {
            return py::make_tuple(s.gt.idx.x, s.gt.idx.y, s.gt.idx.z);
          })
      .def_property_readonly(
          "gt_box", [](const Scene& s) { return box_to_tuple(s.gt.box); })
      .def_property_readonly("horizon_row",
                             [](const Scene& s) { return s.horizon_row; })
      .def_property_readonly("aspect",
                             [](const Scene& s) { return s.spec.aspect; })
      .def_property_readonly("category", [](const Scene& s) {
        return s.spec.category == ObjectSpec::Category::grounded ? "grounded"
                                                                 : "flyer";
      })
      .def_property_readonly("seed", [](const Scene& s) { return s.seed; });

  m.def(
      "generate_scene",
      [](std::uint64_t seed, const OracleParams& p, int size,
         const ScaleGrid& g) {
        return generate_scene(seed, p, ImageDims{size, size}, g);
      },
      py::arg("seed"), py::arg("params") = OracleParams{},
      py::arg("size") = 64, py::arg("grid") = ScaleGrid::make_default());
  m.def("oracle_plausibility", [](const Scene& s, const py::tuple& box) {
    return oracle_plausibility(s, box_from_tuple(box));
  });
  m.def("oracle_heatmap", [](const Scene& s, const ScaleGrid& g) {
    return heatmap_to_array(oracle_heatmap(s, g));
  });

  m.def("read_dataset", [](const std::string& dir) {
    Dataset ds = read_dataset(dir);
    py::list scenes;
    for (std::size_t i = 0; i < ds.scenes.size(); ++i)
      scenes.append(scene_from_dataset(ds, i));
    return scenes;
  });
  m.def("read_toph", [](const std::string& path) {
    return heatmap_to_array(read_toph(path));
  });

  py::class_<Predictor>(m, "Predictor")
      .def(py::init<const std::string&>())
      .def("predict", &Predictor::predict, py::arg("bg"), py::arg("obj"),
           py::arg("k") = 5)
      .def("attention_map", &Predictor::attention_map, py::arg("bg"),
           py::arg("obj"), py::arg("layer") = 0, py::arg("head") = 0)
      .def_property_readonly("input_size", &Predictor::input_size)
      .def_property_readonly("grid", &Predictor::grid);

  py::register_exception<Error>(m, "PlacekitError");
}

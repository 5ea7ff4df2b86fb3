import numpy as np
import pytest

from vesselmend import onnxlite as ox
from vesselmend.errors import ModelLoadError


def _identity_model(path):
    ox.save_model(
        path,
        [ox.Node("Identity", ["input"], ["output"])],
        {},
        [("input", [1, 1, "h", "w"])],
        [("output", [1, 1, "h", "w"])],
    )


class TestCodec:
    def test_roundtrip_structure(self, tmp_path):
        w = np.arange(8, dtype=np.float32).reshape(2, 1, 2, 2)
        nodes = [
            ox.Node("Conv", ["input", "w"], ["c"],
                    {"kernel_shape": [2, 2], "strides": [1, 1],
                     "pads": [0, 0, 0, 0]}),
            ox.Node("Relu", ["c"], ["output"]),
        ]
        p = tmp_path / "m.onnx"
        ox.save_model(p, nodes, {"w": w},
                      [("input", [1, 1, "h", "w"])],
                      [("output", [1, 2, "h2", "w2"])])
        model = ox.load_model(p)
        assert [n.op_type for n in model.nodes] == ["Conv", "Relu"]
        assert model.nodes[0].attrs["kernel_shape"] == [2, 2]
        assert np.array_equal(model.initializers["w"], w)
        assert model.input_names == ["input"]
        assert model.output_names == ["output"]

    def test_unsupported_op_rejected(self, tmp_path):
        p = tmp_path / "m.onnx"
        ox.save_model(p, [ox.Node("Gemm", ["input"], ["output"])], {},
                      [("input", [1, 4])], [("output", [1, 4])])
        with pytest.raises(ModelLoadError):
            ox.load_model(p)

    def test_garbage_file(self, tmp_path):
        p = tmp_path / "m.onnx"
        p.write_bytes(b"this is not a protobuf at all")
        with pytest.raises(ModelLoadError):
            ox.load_model(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ModelLoadError):
            ox.load_model(tmp_path / "absent.onnx")


class TestExecutor:
    def test_identity(self, tmp_path):
        p = tmp_path / "id.onnx"
        _identity_model(p)
        model = ox.load_model(p)
        x = np.random.default_rng(0).random((1, 1, 6, 7)).astype(np.float32)
        assert np.array_equal(model.run({"input": x})["output"], x)

    def test_conv_against_torch(self, tmp_path):
        torch = pytest.importorskip("torch")
        conv = torch.nn.Conv2d(2, 4, 3, stride=2, padding=1)
        nodes = [ox.Node("Conv", ["input", "w", "b"], ["output"],
                         {"kernel_shape": [3, 3], "strides": [2, 2],
                          "pads": [1, 1, 1, 1]})]
        p = tmp_path / "c.onnx"
        ox.save_model(p, nodes,
                      {"w": conv.weight.detach().numpy(),
                       "b": conv.bias.detach().numpy()},
                      [("input", [1, 2, "h", "w"])],
                      [("output", [1, 4, "h2", "w2"])])
        model = ox.load_model(p)
        x = np.random.default_rng(1).random((1, 2, 12, 14)).astype(np.float32)
        got = model.run({"input": x})["output"]
        want = conv(torch.from_numpy(x)).detach().numpy()
        assert got.shape == want.shape
        assert np.abs(got - want).max() < 1e-5

    def test_conv3d_against_torch(self, tmp_path):
        torch = pytest.importorskip("torch")
        conv = torch.nn.Conv3d(1, 2, 3, stride=1, padding=1)
        nodes = [ox.Node("Conv", ["input", "w", "b"], ["output"],
                         {"kernel_shape": [3, 3, 3], "strides": [1, 1, 1],
                          "pads": [1, 1, 1, 1, 1, 1]})]
        p = tmp_path / "c3.onnx"
        ox.save_model(p, nodes,
                      {"w": conv.weight.detach().numpy(),
                       "b": conv.bias.detach().numpy()},
                      [("input", [1, 1, "d", "h", "w"])],
                      [("output", [1, 2, "d", "h", "w"])])
        model = ox.load_model(p)
        x = np.random.default_rng(2).random((1, 1, 6, 7, 8)).astype(np.float32)
        got = model.run({"input": x})["output"]
        want = conv(torch.from_numpy(x)).detach().numpy()
        assert np.abs(got - want).max() < 1e-5

    def test_instance_norm_against_torch(self, tmp_path):
        torch = pytest.importorskip("torch")
        inorm = torch.nn.InstanceNorm2d(3, affine=True)
        with torch.no_grad():
            inorm.weight.uniform_(0.5, 1.5)
            inorm.bias.uniform_(-0.5, 0.5)
        nodes = [ox.Node("InstanceNormalization", ["input", "s", "b"],
                         ["output"], {"epsilon": 1e-5})]
        p = tmp_path / "in.onnx"
        ox.save_model(p, nodes,
                      {"s": inorm.weight.detach().numpy(),
                       "b": inorm.bias.detach().numpy()},
                      [("input", [1, 3, "h", "w"])],
                      [("output", [1, 3, "h", "w"])])
        model = ox.load_model(p)
        x = np.random.default_rng(3).random((1, 3, 9, 11)).astype(np.float32)
        got = model.run({"input": x})["output"]
        want = inorm(torch.from_numpy(x)).detach().numpy()
        assert np.abs(got - want).max() < 1e-5

    def test_resize_nearest(self, tmp_path):
        nodes = [ox.Node("Resize", ["input", "", "scales"], ["output"],
                         {"mode": "nearest",
                          "coordinate_transformation_mode": "asymmetric",
                          "nearest_mode": "floor"})]
        p = tmp_path / "r.onnx"
        ox.save_model(p, nodes,
                      {"scales": np.array([1, 1, 2, 2], dtype=np.float32)},
                      [("input", [1, 1, "h", "w"])],
                      [("output", [1, 1, "h2", "w2"])])
        model = ox.load_model(p)
        x = np.arange(6, dtype=np.float32).reshape(1, 1, 2, 3)
        got = model.run({"input": x})["output"]
        assert np.array_equal(got, x.repeat(2, axis=2).repeat(2, axis=3))

    def test_add_concat_sigmoid(self, tmp_path):
        nodes = [
            ox.Node("Add", ["input", "input"], ["a"]),
            ox.Node("Concat", ["a", "input"], ["c"], {"axis": 1}),
            ox.Node("Sigmoid", ["c"], ["output"]),
        ]
        p = tmp_path / "acs.onnx"
        ox.save_model(p, nodes, {},
                      [("input", [1, 1, "h", "w"])],
                      [("output", [1, 2, "h", "w"])])
        model = ox.load_model(p)
        x = np.random.default_rng(4).random((1, 1, 4, 4)).astype(np.float32)
        got = model.run({"input": x})["output"]
        want = 1.0 / (1.0 + np.exp(-np.concatenate([2 * x, x], axis=1)))
        assert np.abs(got - want).max() < 1e-6

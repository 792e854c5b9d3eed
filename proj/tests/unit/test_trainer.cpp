#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "cblend/error.hpp"
#include "cblend/trainer.hpp"

using namespace cblend;

namespace {

TrainConfig tiny_config() {
    TrainConfig c;
    c.epochs = 1;
    c.batch_size = 8;
    c.steps_per_epoch = 3;
    c.seed = 5;
    return c;
}

DenoiserDims tiny_dims() {
    DenoiserDims d;
    d.hidden = 8;
    d.embed = 4;
    d.time = 4;
    return d;
}

const Domain& gmm() {
    static const Domain d(GmmDomain::default_world());
    return d;
}

} // namespace

TEST_SUITE("trainer") {
TEST_CASE("zero learning rate leaves parameters unchanged and the checkpoint round-trips") {
    TrainConfig c = tiny_config();
    c.learning_rate = 0.0;
    const Checkpoint start = init_checkpoint(gmm(), tiny_dims(), c);
    Checkpoint ck = start;
    train(gmm(), ck, {});
    CHECK(ck.net == start.net);
    CHECK(ck.table == start.table);
    CHECK(ck.loss_curve.size() == 1);
    CHECK(ck.adam.step == 3);
    const auto bytes = serialize_checkpoint(ck);
    CHECK(serialize_checkpoint(deserialize_checkpoint(bytes)) == bytes);
}

TEST_CASE("zero gradients keep parameters and decay moments") {
    std::vector<Tensor> params{Tensor(Shape{3}, {1.0f, -2.0f, 0.5f})};
    const std::vector<Tensor> grads{Tensor(Shape{3}, 0.0f)};
    AdamState st = AdamState::zeros_like(params);
    st.m[0] = Tensor(Shape{3}, 1.0f);
    st.v[0] = Tensor(Shape{3}, 1.0f);
    TrainConfig c;
    c.learning_rate = 0.0;
    adam_step(params, grads, st, c);
    CHECK(params[0] == Tensor(Shape{3}, {1.0f, -2.0f, 0.5f}));
    CHECK(st.m[0].data()[0] == doctest::Approx(0.9));
    CHECK(st.v[0].data()[0] == doctest::Approx(0.999));
}

TEST_CASE("adam without momentum moves by the learning rate") {
    std::vector<Tensor> params{Tensor::scalar(1.0f)};
    const std::vector<Tensor> grads{Tensor::scalar(1.0f)};
    AdamState st;
    TrainConfig c;
    c.beta1 = 0.0;
    c.beta2 = 0.0;
    c.learning_rate = 0.01;
    adam_step(params, grads, st, c);
    CHECK(params[0].item() == doctest::Approx(1.0 - 0.01 / (1.0 + 1e-8)));
    CHECK(st.step == 1);
}

TEST_CASE("training is deterministic for a config and seed") {
    const Checkpoint a = train_new(gmm(), tiny_dims(), tiny_config());
    const Checkpoint b = train_new(gmm(), tiny_dims(), tiny_config());
    CHECK(serialize_checkpoint(a) == serialize_checkpoint(b));
    TrainConfig other = tiny_config();
    other.seed = 6;
    CHECK(serialize_checkpoint(train_new(gmm(), tiny_dims(), other)) != serialize_checkpoint(a));
}

TEST_CASE("resuming continues the epoch sequence") {
    TrainConfig two = tiny_config();
    two.epochs = 2;
    const Checkpoint straight = train_new(gmm(), tiny_dims(), two);
    Checkpoint resumed = train_new(gmm(), tiny_dims(), tiny_config());
    resumed = deserialize_checkpoint(serialize_checkpoint(resumed));
    train(gmm(), resumed, {});
    CHECK(resumed.loss_curve == straight.loss_curve);
    CHECK(resumed.net == straight.net);
}

TEST_CASE("training reduces the loss on the gmm world") {
    TrainConfig c = tiny_config();
    c.epochs = 6;
    c.steps_per_epoch = 40;
    c.batch_size = 32;
    c.learning_rate = 3e-3;
    DenoiserDims d = tiny_dims();
    d.hidden = 32;
    const Checkpoint ck = train_new(gmm(), d, c);
    CHECK(ck.loss_curve.back() < ck.loss_curve.front());
}

TEST_CASE("corrupt checkpoints are rejected") {
    const auto bytes = serialize_checkpoint(init_checkpoint(gmm(), tiny_dims(), tiny_config()));
    auto flipped = bytes;
    flipped[bytes.size() / 2] ^= 0x10;
    CHECK_THROWS_AS(deserialize_checkpoint(flipped), ChecksumError);
    auto magic = bytes;
    magic[0] = 'X';
    CHECK_THROWS_AS(deserialize_checkpoint(magic), FormatError);
    auto version = bytes;
    version[8] = static_cast<std::uint8_t>(kCheckpointVersion + 1);
    CHECK_THROWS_AS(deserialize_checkpoint(version), UnsupportedVersionError);
    const std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + static_cast<long>(bytes.size() / 3));
    CHECK_THROWS_AS(deserialize_checkpoint(cut), TruncationError);
}

TEST_CASE("save, load and save again gives identical files") {
    const auto dir = std::filesystem::temp_directory_path() / "cblend_unit_ckpt";
    std::filesystem::remove_all(dir);
    const Checkpoint ck = train_new(gmm(), tiny_dims(), tiny_config());
    save_checkpoint(dir / "a" / "m.ckpt", ck);
    save_checkpoint(dir / "b.ckpt", load_checkpoint(dir / "a" / "m.ckpt"));
    CHECK(read_file_bytes(dir / "a" / "m.ckpt") == read_file_bytes(dir / "b.ckpt"));
    CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), IoError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("config validation") {
    TrainConfig c;
    CHECK_NOTHROW(c.validate());
    c.p_uncond = 1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = TrainConfig{};
    c.batch_size = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = TrainConfig{};
    c.learning_rate = -1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}
}

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "foregan/checkpoint.hpp"
#include "foregan/data.hpp"
#include "foregan/gan.hpp"
#include "oracles.hpp"

using namespace foregan;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
    static int counter = 0;
    const fs::path p =
        fs::temp_directory_path() / ("foregan_test_" + tag + "_" + std::to_string(counter++));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

Image8 random_image8(int w, int h, Rng& rng) {
    Image8 img;
    img.width = w;
    img.height = h;
    img.channels = 1;
    img.pixels.resize(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(256));
    return img;
}

} // namespace

TEST_CASE("pgm io") {
    const fs::path dir = fresh_dir("pgm");
    Rng rng(1);
    SECTION("round-trip is bit exact") {
        const Image8 img = random_image8(13, 7, rng);
        const std::string path = (dir / "a.pgm").string();
        write_pgm(path, img);
        const Image8 back = read_pgm(path);
        CHECK(back.width == 13);
        CHECK(back.height == 7);
        CHECK(back.pixels == img.pixels);
    }
    SECTION("comments and whitespace in the header are accepted") {
        const std::string path = (dir / "c.pgm").string();
        std::ofstream out(path, std::ios::binary);
        out << "P5\n# a comment\n 2 # inline\n2\n255\n";
        out.write("\x01\x02\x03\x04", 4);
        out.close();
        const Image8 img = read_pgm(path);
        CHECK(img.width == 2);
        CHECK(img.height == 2);
        CHECK(img.pixels == std::vector<std::uint8_t>{1, 2, 3, 4});
    }
    SECTION("bad magic raises a format error") {
        const std::string path = (dir / "bad.pgm").string();
        std::ofstream(path) << "P2\n1 1\n255\n0";
        CHECK_THROWS_AS(read_pgm(path), FormatError);
    }
    SECTION("truncated pixel data raises an io error") {
        const std::string path = (dir / "short.pgm").string();
        std::ofstream out(path, std::ios::binary);
        out << "P5\n4 4\n255\n";
        out.write("\x01\x02", 2);
        out.close();
        CHECK_THROWS_AS(read_pgm(path), IoError);
    }
    SECTION("missing file raises an io error") {
        CHECK_THROWS_AS(read_pgm((dir / "absent.pgm").string()), IoError);
    }
}

TEST_CASE("png io") {
    const fs::path dir = fresh_dir("png");
    Rng rng(2);
    SECTION("gray round-trip is bit exact") {
        const Image8 img = random_image8(9, 5, rng);
        const std::string path = (dir / "g.png").string();
        write_png_gray(path, img);
        const Image8 back = read_png(path);
        CHECK(back.channels == 1);
        CHECK(back.width == 9);
        CHECK(back.pixels == img.pixels);
    }
    SECTION("bad signature raises a format error") {
        const std::string path = (dir / "bad.png").string();
        std::ofstream(path) << "definitely not a png";
        CHECK_THROWS_AS(read_png(path), FormatError);
    }
    SECTION("read_image dispatches by extension") {
        const Image8 img = random_image8(4, 4, rng);
        write_png_gray((dir / "d.png").string(), img);
        CHECK(read_image((dir / "d.png").string()).pixels == img.pixels);
        CHECK_THROWS_AS(read_image((dir / "d.bmp").string()), FormatError);
    }
}

TEST_CASE("load_sequence") {
    Rng rng(3);
    SECTION("flat layout loads frames in lexicographic order") {
        const fs::path dir = fresh_dir("flat");
        write_pgm((dir / "c.pgm").string(), random_image8(6, 6, rng));
        write_pgm((dir / "a.pgm").string(), random_image8(6, 6, rng));
        write_pgm((dir / "b.pgm").string(), random_image8(6, 6, rng));
        const Sequence seq = load_sequence(dir.string(), SequenceLayout::FlatFrames);
        REQUIRE(seq.size() == 3);
        CHECK(seq.names == std::vector<std::string>{"a.pgm", "b.pgm", "c.pgm"});
        CHECK(seq.frames[0].channels == 1);
        CHECK_FALSE(seq.has_gt());
    }
    SECTION("gt subdirectory attaches masks by filename") {
        const fs::path dir = fresh_dir("flatgt");
        write_pgm((dir / "x.pgm").string(), random_image8(5, 4, rng));
        write_pgm((dir / "y.pgm").string(), random_image8(5, 4, rng));
        fs::create_directories(dir / "gt");
        Mask m = Mask::zeros(5, 4);
        m.set(1, 1, 1);
        write_mask_pgm((dir / "gt" / "x.pgm").string(), m);
        const Sequence seq = load_sequence(dir.string(), SequenceLayout::FlatFrames);
        REQUIRE(seq.size() == 2);
        REQUIRE(seq.gt[0].has_value());
        CHECK_FALSE(seq.gt[1].has_value());
        CHECK(seq.gt[0]->at(1, 1) == 1);
    }
    SECTION("wallflower layout pairs hand_segmented files with frames") {
        const fs::path dir = fresh_dir("wall");
        write_pgm((dir / "b00001.pgm").string(), random_image8(8, 8, rng));
        write_pgm((dir / "b00002.pgm").string(), random_image8(8, 8, rng));
        Mask m = Mask::zeros(8, 8);
        m.set(2, 3, 1);
        write_mask_pgm((dir / "hand_segmented_b00002.pgm").string(), m);
        const Sequence seq = load_sequence(dir.string(), SequenceLayout::WallflowerStyle);
        REQUIRE(seq.size() == 2);
        CHECK(seq.names == std::vector<std::string>{"b00001.pgm", "b00002.pgm"});
        CHECK_FALSE(seq.gt[0].has_value());
        REQUIRE(seq.gt[1].has_value());
        CHECK(seq.gt[1]->at(2, 3) == 1);
    }
    SECTION("inconsistent dimensions raise a format error") {
        const fs::path dir = fresh_dir("dims");
        write_pgm((dir / "a.pgm").string(), random_image8(6, 6, rng));
        write_pgm((dir / "b.pgm").string(), random_image8(7, 6, rng));
        CHECK_THROWS_AS(load_sequence(dir.string(), SequenceLayout::FlatFrames), FormatError);
    }
    SECTION("missing directory raises an io error") {
        CHECK_THROWS_AS(load_sequence("/nonexistent/foregan", SequenceLayout::FlatFrames),
                        IoError);
    }
}

TEST_CASE("preprocess") {
    SECTION("same-size input only rescales values") {
        Frame f;
        f.width = f.height = 8;
        f.channels = 1;
        f.pixels.assign(64, 0.0f);
        for (std::size_t i = 0; i < 64; ++i) f.pixels[i] = static_cast<float>(i * 4);
        const Frame out = preprocess(f, 8);
        for (std::size_t i = 0; i < 64; ++i)
            CHECK(out.pixels[i] == Catch::Approx(f.pixels[i] / 127.5f - 1.0f));
    }
    SECTION("constant 128 maps near zero") {
        Frame f;
        f.width = f.height = 8;
        f.channels = 1;
        f.pixels.assign(64, 128.0f);
        const Frame out = preprocess(f, 8);
        for (const float v : out.pixels) CHECK(v == Catch::Approx(0.00392157).margin(1e-6));
    }
    SECTION("downsampling a checkerboard matches the bilinear oracle") {
        Frame f;
        f.width = f.height = 128;
        f.channels = 1;
        f.pixels.resize(128 * 128);
        for (int y = 0; y < 128; ++y)
            for (int x = 0; x < 128; ++x)
                f.pixels[static_cast<std::size_t>(y * 128 + x)] =
                    ((x / 8 + y / 8) % 2 == 0) ? 255.0f : 0.0f;
        const Frame out = preprocess(f, 64);
        const auto ref = oracle::bilinear(f.pixels, 128, 128, 64);
        for (std::size_t i = 0; i < ref.size(); ++i)
            CHECK(out.pixels[i] == Catch::Approx(ref[i] / 127.5f - 1.0f).margin(1e-5));
    }
    SECTION("output is always inside [-1,1] and the affine map inverts within quantization") {
        Rng rng(5);
        Frame f;
        f.width = f.height = 16;
        f.channels = 1;
        f.pixels.resize(256);
        for (auto& v : f.pixels) v = static_cast<float>(rng.below(256));
        const Frame out = preprocess(f, 16);
        for (std::size_t i = 0; i < 256; ++i) {
            CHECK(out.pixels[i] >= -1.0f);
            CHECK(out.pixels[i] <= 1.0f);
            CHECK(std::fabs((out.pixels[i] + 1.0f) * 127.5f - f.pixels[i]) <= 1.0f);
        }
    }
    SECTION("target below 8 is rejected") {
        Frame f;
        f.width = f.height = 8;
        f.channels = 1;
        f.pixels.assign(64, 0.0f);
        CHECK_THROWS_AS(preprocess(f, 4), ContractError);
    }
}

TEST_CASE("synth_generate") {
    SynthConfig cfg;
    cfg.n_background = 6;
    cfg.n_test = 4;
    cfg.size = 24;
    cfg.object_size_px = 6;
    cfg.seed = 77;
    SECTION("fixed seed regenerates bit-identical sequences") {
        const auto [t1, s1] = synth_generate(cfg);
        const auto [t2, s2] = synth_generate(cfg);
        REQUIRE(t1.size() == 6);
        REQUIRE(s1.size() == 4);
        for (std::size_t i = 0; i < t1.size(); ++i)
            CHECK(t1.frames[i].pixels == t2.frames[i].pixels);
        for (std::size_t i = 0; i < s1.size(); ++i) {
            CHECK(s1.frames[i].pixels == s2.frames[i].pixels);
            CHECK(*s1.gt[i] == *s2.gt[i]);
        }
    }
    SECTION("zero contrast hides the object but keeps its ground truth") {
        SynthConfig c0 = cfg;
        c0.object_contrast = 0.0f;
        SynthConfig c5 = cfg;
        c5.object_contrast = 0.5f;
        const auto [tr0, te0] = synth_generate(c0);
        const auto [tr5, te5] = synth_generate(c5);
        for (std::size_t i = 0; i < te0.size(); ++i) {
            REQUIRE(te0.gt[i].has_value());
            CHECK(te0.gt[i]->count_foreground() == 36);
            CHECK(*te0.gt[i] == *te5.gt[i]);
            // Identical off the object; different on it at contrast 0.5.
            bool differs_on_object = false;
            for (std::size_t p = 0; p < te0.frames[i].pixels.size(); ++p) {
                if (te0.gt[i]->bits[p]) {
                    differs_on_object =
                        differs_on_object || te0.frames[i].pixels[p] != te5.frames[i].pixels[p];
                } else {
                    CHECK(te0.frames[i].pixels[p] == te5.frames[i].pixels[p]);
                }
            }
            CHECK(differs_on_object);
        }
    }
    SECTION("degenerate configuration yields constant frames") {
        SynthConfig flat = cfg;
        flat.wave_amplitude = 0.0f;
        flat.illum_ramp = 0.0f;
        flat.noise_sigma = 0.0f;
        const auto [train_seq, test_seq] = synth_generate(flat);
        for (const auto& f : train_seq.frames)
            for (const float v : f.pixels) CHECK(v == 120.0f);
    }
    SECTION("an object larger than the frame is rejected") {
        SynthConfig bad = cfg;
        bad.object_size_px = 24;
        CHECK_THROWS_AS(synth_generate(bad), ContractError);
    }
    SECTION("written frames reload bit-exactly") {
        const fs::path dir = fresh_dir("synthrt");
        const auto [train_seq, test_seq] = synth_generate(cfg);
        for (std::size_t i = 0; i < train_seq.size(); ++i)
            write_pgm((dir / train_seq.names[i]).string(), frame_to_image(train_seq.frames[i]));
        const Sequence back = load_sequence(dir.string(), SequenceLayout::FlatFrames);
        REQUIRE(back.size() == train_seq.size());
        for (std::size_t i = 0; i < back.size(); ++i)
            CHECK(back.frames[i].pixels == train_seq.frames[i].pixels);
    }
}

TEST_CASE("model checkpointing") {
    const fs::path dir = fresh_dir("ckpt");
    Rng rng(11);
    const GanModel model = GanModel::init(16, 16, 1, rng);
    const std::string path = (dir / "m.fgan").string();

    SECTION("round-trip preserves every parameter bit") {
        save_model(path, model);
        const GanModel back = load_model(path);
        CHECK(back.latent_dim == 16);
        CHECK(back.image_size == 16);
        CHECK(back.channels == 1);
        REQUIRE(back.gen_params.size() == model.gen_params.size());
        REQUIRE(back.disc_params.size() == model.disc_params.size());
        for (const auto& [name, t] : model.gen_params) {
            const Tensor& b = back.gen_params.at(name);
            REQUIRE(b.shape() == t.shape());
            for (std::int64_t i = 0; i < t.numel(); ++i) CHECK(b.data()[i] == t.data()[i]);
        }
        for (const auto& [name, t] : model.disc_params) {
            const Tensor& b = back.disc_params.at(name);
            for (std::int64_t i = 0; i < t.numel(); ++i) CHECK(b.data()[i] == t.data()[i]);
        }
    }
    SECTION("generation is identical after a round-trip") {
        save_model(path, model);
        const GanModel back = load_model(path);
        Rng zr(13);
        const LatentCode z = sample_latent(zr, 16);
        const Tensor a = generate(model, z);
        const Tensor b = generate(back, z);
        for (std::int64_t i = 0; i < a.numel(); ++i) CHECK(a.data()[i] == b.data()[i]);
    }
    SECTION("corrupted magic raises a format error") {
        save_model(path, model);
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.write("NOPE", 4);
        f.close();
        CHECK_THROWS_AS(load_model(path), FormatError);
    }
    SECTION("truncation raises an io error") {
        save_model(path, model);
        const auto size = fs::file_size(path);
        fs::resize_file(path, size / 2);
        CHECK_THROWS_AS(load_model(path), IoError);
    }
    SECTION("missing file raises an io error") {
        CHECK_THROWS_AS(load_model((dir / "absent.fgan").string()), IoError);
    }
}

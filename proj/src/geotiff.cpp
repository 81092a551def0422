#include "tofmap/geotiff.hpp"

#include <tiffio.h>

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include "tofmap/errors.hpp"

namespace tofmap {
namespace {

constexpr ttag_t kModelPixelScale = 33550;
constexpr ttag_t kModelTiepoint = 33922;
constexpr ttag_t kModelTransformation = 34264;
constexpr ttag_t kGeoKeyDirectory = 34735;
constexpr ttag_t kGdalNodata = 42113;

constexpr unsigned short kGTModelTypeGeoKey = 1024;
constexpr unsigned short kGTRasterTypeGeoKey = 1025;
constexpr unsigned short kGeographicTypeGeoKey = 2048;
constexpr unsigned short kProjectedCSTypeGeoKey = 3072;
constexpr unsigned short kRasterPixelIsPoint = 2;

char kNamePixelScale[] = "ModelPixelScaleTag";
char kNameTiepoint[] = "ModelTiepointTag";
char kNameTransformation[] = "ModelTransformationTag";
char kNameGeoKeys[] = "GeoKeyDirectoryTag";
char kNameNodata[] = "GDALNoDataValue";

const TIFFFieldInfo kGeoFieldInfo[] = {
    {kModelPixelScale, -1, -1, TIFF_DOUBLE, FIELD_CUSTOM, 1, 1, kNamePixelScale},
    {kModelTiepoint, -1, -1, TIFF_DOUBLE, FIELD_CUSTOM, 1, 1, kNameTiepoint},
    {kModelTransformation, -1, -1, TIFF_DOUBLE, FIELD_CUSTOM, 1, 1, kNameTransformation},
    {kGeoKeyDirectory, -1, -1, TIFF_SHORT, FIELD_CUSTOM, 1, 1, kNameGeoKeys},
    {kGdalNodata, -1, -1, TIFF_ASCII, FIELD_CUSTOM, 1, 0, kNameNodata},
};

TIFFExtendProc g_parent_extender = nullptr;
thread_local std::string g_last_tiff_error;

void geo_tag_extender(TIFF* tif) {
    TIFFMergeFieldInfo(tif, kGeoFieldInfo, sizeof(kGeoFieldInfo) / sizeof(kGeoFieldInfo[0]));
    if (g_parent_extender) g_parent_extender(tif);
}

void tiff_error_handler(const char* module, const char* fmt, va_list ap) {
    char buf[512];
    std::vsnprintf(buf, sizeof(buf), fmt, ap);
    g_last_tiff_error = (module ? std::string(module) + ": " : std::string()) + buf;
}

void register_geotiff_tags() {
    static std::once_flag once;
    std::call_once(once, [] {
        g_parent_extender = TIFFSetTagExtender(geo_tag_extender);
        TIFFSetErrorHandler(tiff_error_handler);
        TIFFSetWarningHandler(nullptr);
    });
}

struct TiffCloser {
    void operator()(TIFF* t) const noexcept { TIFFClose(t); }
};
using TiffHandle = std::unique_ptr<TIFF, TiffCloser>;

TiffHandle open_tiff(const std::filesystem::path& path, const char* mode) {
    register_geotiff_tags();
    g_last_tiff_error.clear();
    TIFF* t = TIFFOpen(path.c_str(), mode);
    if (!t) {
        throw IoError("cannot open TIFF '" + path.string() + "'" +
                      (g_last_tiff_error.empty() ? "" : ": " + g_last_tiff_error));
    }
    return TiffHandle(t);
}

float decode_sample(const unsigned char* p, int bits, int format) {
    switch (format) {
        case SAMPLEFORMAT_IEEEFP:
            if (bits == 32) {
                float v;
                std::memcpy(&v, p, 4);
                return v;
            }
            if (bits == 64) {
                double v;
                std::memcpy(&v, p, 8);
                return static_cast<float>(v);
            }
            break;
        case SAMPLEFORMAT_INT:
            if (bits == 8) return static_cast<float>(*reinterpret_cast<const std::int8_t*>(p));
            if (bits == 16) {
                std::int16_t v;
                std::memcpy(&v, p, 2);
                return v;
            }
            if (bits == 32) {
                std::int32_t v;
                std::memcpy(&v, p, 4);
                return static_cast<float>(v);
            }
            break;
        default:
            if (bits == 8) return *p;
            if (bits == 16) {
                std::uint16_t v;
                std::memcpy(&v, p, 2);
                return v;
            }
            if (bits == 32) {
                std::uint32_t v;
                std::memcpy(&v, p, 4);
                return static_cast<float>(v);
            }
            break;
    }
    throw IoError("unsupported TIFF sample layout: " + std::to_string(bits) + " bit, format " +
                  std::to_string(format));
}

void read_georeferencing(TIFF* tif, RasterGrid& grid) {
    std::uint16_t count = 0;
    double* values = nullptr;
    bool pixel_is_point = false;

    std::uint16_t key_count = 0;
    std::uint16_t* keys = nullptr;
    if (TIFFGetField(tif, kGeoKeyDirectory, &key_count, &keys) && key_count >= 4) {
        const int n = keys[3];
        for (int k = 0; k < n && 4 + 4 * k + 3 < key_count; ++k) {
            const std::uint16_t* e = keys + 4 + 4 * k;
            if (e[1] != 0) continue;  // value stored elsewhere; not used here
            if (e[0] == kGTRasterTypeGeoKey && e[3] == kRasterPixelIsPoint) pixel_is_point = true;
            if (e[0] == kProjectedCSTypeGeoKey || e[0] == kGeographicTypeGeoKey) {
                if (e[3] != 32767) grid.epsg = e[3];
            }
        }
    }

    GeoTransform t;
    bool have = false;
    if (TIFFGetField(tif, kModelPixelScale, &count, &values) && count >= 2) {
        t.pixel_size_x = values[0];
        t.pixel_size_y = values[1];
        std::uint16_t tp_count = 0;
        double* tp = nullptr;
        if (TIFFGetField(tif, kModelTiepoint, &tp_count, &tp) && tp_count >= 6) {
            t.origin_x = tp[3] - tp[0] * t.pixel_size_x;
            t.origin_y = tp[4] + tp[1] * t.pixel_size_y;
            have = true;
        }
    } else if (TIFFGetField(tif, kModelTransformation, &count, &values) && count >= 16) {
        if (values[1] != 0.0 || values[4] != 0.0) {
            throw IoError("rotated ModelTransformation is not supported");
        }
        t.pixel_size_x = values[0];
        t.pixel_size_y = -values[5];
        t.origin_x = values[3];
        t.origin_y = values[7];
        have = true;
    }
    if (have && pixel_is_point) {
        t.origin_x -= 0.5 * t.pixel_size_x;
        t.origin_y += 0.5 * t.pixel_size_y;
    }
    if (have) {
        t.validate();
        grid.transform = t;
    }
}

}  // namespace

RasterGrid read_geotiff(const std::filesystem::path& path) {
    TiffHandle handle = open_tiff(path, "r");
    TIFF* tif = handle.get();

    std::uint32_t width = 0, height = 0;
    std::uint16_t spp = 1, bits = 8, format = SAMPLEFORMAT_UINT, planar = PLANARCONFIG_CONTIG;
    TIFFGetField(tif, TIFFTAG_IMAGEWIDTH, &width);
    TIFFGetField(tif, TIFFTAG_IMAGELENGTH, &height);
    TIFFGetFieldDefaulted(tif, TIFFTAG_SAMPLESPERPIXEL, &spp);
    TIFFGetFieldDefaulted(tif, TIFFTAG_BITSPERSAMPLE, &bits);
    TIFFGetFieldDefaulted(tif, TIFFTAG_SAMPLEFORMAT, &format);
    TIFFGetFieldDefaulted(tif, TIFFTAG_PLANARCONFIG, &planar);
    if (width == 0 || height == 0 || spp == 0) throw IoError("empty TIFF: " + path.string());
    if (bits % 8 != 0) throw IoError("sub-byte samples are not supported: " + path.string());

    const SampleType type =
        (bits == 8 && format == SAMPLEFORMAT_UINT) ? SampleType::UInt8 : SampleType::Float32;
    RasterGrid grid;
    grid.width = static_cast<int>(width);
    grid.height = static_cast<int>(height);
    grid.type = type;
    grid.bands.assign(spp, std::vector<float>(static_cast<std::size_t>(width) * height));
    grid.nodata.assign(spp, std::nullopt);
    read_georeferencing(tif, grid);

    char* nodata_text = nullptr;
    if (TIFFGetField(tif, kGdalNodata, &nodata_text) && nodata_text) {
        char* end = nullptr;
        const double v = std::strtod(nodata_text, &end);
        if (end != nodata_text) grid.nodata.assign(spp, static_cast<float>(v));
    }

    const int bytes = bits / 8;
    const bool separate = planar == PLANARCONFIG_SEPARATE;
    const int samples_per_chunk_pixel = separate ? 1 : spp;
    const int planes = separate ? spp : 1;

    if (TIFFIsTiled(tif)) {
        std::uint32_t tw = 0, th = 0;
        TIFFGetField(tif, TIFFTAG_TILEWIDTH, &tw);
        TIFFGetField(tif, TIFFTAG_TILELENGTH, &th);
        std::vector<unsigned char> buf(static_cast<std::size_t>(TIFFTileSize(tif)));
        for (int plane = 0; plane < planes; ++plane) {
            for (std::uint32_t y = 0; y < height; y += th) {
                for (std::uint32_t x = 0; x < width; x += tw) {
                    if (TIFFReadTile(tif, buf.data(), x, y, 0, static_cast<tsample_t>(plane)) < 0) {
                        throw IoError("failed reading tile of " + path.string() + ": " +
                                      g_last_tiff_error);
                    }
                    const std::uint32_t rows = std::min(th, height - y);
                    const std::uint32_t cols = std::min(tw, width - x);
                    for (std::uint32_t r = 0; r < rows; ++r) {
                        for (std::uint32_t c = 0; c < cols; ++c) {
                            const unsigned char* px =
                                buf.data() + (static_cast<std::size_t>(r) * tw + c) *
                                                 samples_per_chunk_pixel * bytes;
                            const std::size_t dst = static_cast<std::size_t>(y + r) * width + x + c;
                            for (int s = 0; s < samples_per_chunk_pixel; ++s) {
                                const int b = separate ? plane : s;
                                grid.bands[b][dst] = decode_sample(px + s * bytes, bits, format);
                            }
                        }
                    }
                }
            }
        }
    } else {
        std::vector<unsigned char> buf(static_cast<std::size_t>(TIFFScanlineSize(tif)));
        for (int plane = 0; plane < planes; ++plane) {
            for (std::uint32_t row = 0; row < height; ++row) {
                if (TIFFReadScanline(tif, buf.data(), row, static_cast<tsample_t>(plane)) < 0) {
                    throw IoError("failed reading scanline of " + path.string() + ": " +
                                  g_last_tiff_error);
                }
                const std::size_t base = static_cast<std::size_t>(row) * width;
                for (std::uint32_t c = 0; c < width; ++c) {
                    const unsigned char* px =
                        buf.data() + static_cast<std::size_t>(c) * samples_per_chunk_pixel * bytes;
                    for (int s = 0; s < samples_per_chunk_pixel; ++s) {
                        const int b = separate ? plane : s;
                        grid.bands[b][base + c] = decode_sample(px + s * bytes, bits, format);
                    }
                }
            }
        }
    }
    return grid;
}

void write_geotiff(const std::filesystem::path& path, const RasterGrid& grid,
                   const GeoTiffWriteOptions& options) {
    grid.validate();
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    TiffHandle handle = open_tiff(path, "w");
    TIFF* tif = handle.get();

    const auto spp = static_cast<std::uint16_t>(grid.band_count());
    const bool u8 = grid.type == SampleType::UInt8;
    const int bytes = u8 ? 1 : 4;
    TIFFSetField(tif, TIFFTAG_IMAGEWIDTH, static_cast<std::uint32_t>(grid.width));
    TIFFSetField(tif, TIFFTAG_IMAGELENGTH, static_cast<std::uint32_t>(grid.height));
    TIFFSetField(tif, TIFFTAG_SAMPLESPERPIXEL, spp);
    TIFFSetField(tif, TIFFTAG_BITSPERSAMPLE, static_cast<std::uint16_t>(bytes * 8));
    TIFFSetField(tif, TIFFTAG_SAMPLEFORMAT,
                 static_cast<std::uint16_t>(u8 ? SAMPLEFORMAT_UINT : SAMPLEFORMAT_IEEEFP));
    TIFFSetField(tif, TIFFTAG_PLANARCONFIG, PLANARCONFIG_CONTIG);
    TIFFSetField(tif, TIFFTAG_PHOTOMETRIC, PHOTOMETRIC_MINISBLACK);
    if (spp > 1) {
        std::vector<std::uint16_t> extra(spp - 1u, EXTRASAMPLE_UNSPECIFIED);
        TIFFSetField(tif, TIFFTAG_EXTRASAMPLES, static_cast<std::uint16_t>(extra.size()),
                     extra.data());
    }
    if (options.deflate && TIFFIsCODECConfigured(COMPRESSION_ADOBE_DEFLATE)) {
        TIFFSetField(tif, TIFFTAG_COMPRESSION, COMPRESSION_ADOBE_DEFLATE);
    } else {
        TIFFSetField(tif, TIFFTAG_COMPRESSION, COMPRESSION_NONE);
    }
    const std::size_t row_bytes = static_cast<std::size_t>(grid.width) * spp * bytes;
    const auto rows_per_strip =
        static_cast<std::uint32_t>(std::max<std::size_t>(1, (256u * 1024u) / row_bytes));
    TIFFSetField(tif, TIFFTAG_ROWSPERSTRIP, rows_per_strip);

    const double scale[3] = {grid.transform.pixel_size_x, grid.transform.pixel_size_y, 0.0};
    const double tiepoint[6] = {0.0, 0.0, 0.0, grid.transform.origin_x, grid.transform.origin_y,
                                0.0};
    TIFFSetField(tif, kModelPixelScale, static_cast<std::uint16_t>(3), scale);
    TIFFSetField(tif, kModelTiepoint, static_cast<std::uint16_t>(6), tiepoint);
    std::vector<std::uint16_t> keys = {1, 1, 0, 0};
    keys.insert(keys.end(), {kGTModelTypeGeoKey, 0, 1, 1});   // projected
    keys.insert(keys.end(), {kGTRasterTypeGeoKey, 0, 1, 1});  // pixel is area
    if (grid.epsg > 0 && grid.epsg < 32767) {
        keys.insert(keys.end(),
                    {kProjectedCSTypeGeoKey, 0, 1, static_cast<std::uint16_t>(grid.epsg)});
    }
    keys[3] = static_cast<std::uint16_t>((keys.size() - 4) / 4);
    TIFFSetField(tif, kGeoKeyDirectory, static_cast<std::uint16_t>(keys.size()), keys.data());

    if (grid.nodata[0].has_value()) {
        std::ostringstream os;
        os.precision(9);
        os << *grid.nodata[0];
        const std::string text = os.str();
        TIFFSetField(tif, kGdalNodata, text.c_str());
    }

    std::vector<unsigned char> line(row_bytes);
    for (int row = 0; row < grid.height; ++row) {
        const std::size_t base = static_cast<std::size_t>(row) * grid.width;
        for (int c = 0; c < grid.width; ++c) {
            for (int b = 0; b < spp; ++b) {
                unsigned char* dst = line.data() + (static_cast<std::size_t>(c) * spp + b) * bytes;
                const float v = grid.bands[b][base + c];
                if (u8) {
                    const float clamped = std::isnan(v) ? 0.0f : std::clamp(v, 0.0f, 255.0f);
                    *dst = static_cast<unsigned char>(std::lround(clamped));
                } else {
                    std::memcpy(dst, &v, 4);
                }
            }
        }
        if (TIFFWriteScanline(tif, line.data(), static_cast<std::uint32_t>(row), 0) < 0) {
            throw IoError("failed writing '" + path.string() + "': " + g_last_tiff_error);
        }
    }
}

BinaryMask read_mask_geotiff(const std::filesystem::path& path) {
    return raster_to_mask(read_geotiff(path));
}

void write_mask_geotiff(const std::filesystem::path& path, const BinaryMask& mask) {
    write_geotiff(path, mask_to_raster(mask));
}

}  // namespace tofmap

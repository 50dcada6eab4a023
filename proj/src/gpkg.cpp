#include "streetscape/gpkg.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <limits>
#include <map>

#include <fmt/format.h>
#include <sqlite3.h>

#include "streetscape/error.hpp"

namespace streetscape::gpkg {

namespace {

static_assert(std::endian::native == std::endian::little, "GeoPackage blobs are written little-endian");

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Db {
 public:
  explicit Db(const std::filesystem::path& path) {
    if (sqlite3_open(path.c_str(), &db_) != SQLITE_OK) {
      const std::string msg = db_ ? sqlite3_errmsg(db_) : "out of memory";
      sqlite3_close(db_);
      throw Error(ErrorKind::kIo, fmt::format("geopackage {}: {}", path.string(), msg));
    }
  }
  ~Db() { sqlite3_close(db_); }
  Db(const Db&) = delete;
  Db& operator=(const Db&) = delete;

  void exec(const std::string& sql) {
    char* err = nullptr;
    if (sqlite3_exec(db_, sql.c_str(), nullptr, nullptr, &err) != SQLITE_OK) {
      const std::string msg = err ? err : "unknown";
      sqlite3_free(err);
      throw Error(ErrorKind::kIo, fmt::format("geopackage: {} (in: {})", msg, sql));
    }
  }
  sqlite3* get() { return db_; }

 private:
  sqlite3* db_ = nullptr;
};

class Statement {
 public:
  Statement(Db& db, const std::string& sql) : db_(db) {
    if (sqlite3_prepare_v2(db.get(), sql.c_str(), -1, &stmt_, nullptr) != SQLITE_OK) {
      throw Error(ErrorKind::kIo, fmt::format("geopackage: {}", sqlite3_errmsg(db.get())));
    }
  }
  ~Statement() { sqlite3_finalize(stmt_); }
  Statement(const Statement&) = delete;
  Statement& operator=(const Statement&) = delete;

  sqlite3_stmt* get() { return stmt_; }
  void step_reset() {
    if (sqlite3_step(stmt_) != SQLITE_DONE) {
      throw Error(ErrorKind::kIo, fmt::format("geopackage: {}", sqlite3_errmsg(db_.get())));
    }
    sqlite3_reset(stmt_);
    sqlite3_clear_bindings(stmt_);
  }

 private:
  Db& db_;
  sqlite3_stmt* stmt_ = nullptr;
};

std::string quote_ident(const std::string& name) {
  std::string out = "\"";
  for (char c : name) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

const char* column_type(const geojson::Properties& v) {
  if (v.is_string()) return "TEXT";
  if (v.is_number_integer() || v.is_boolean()) return "INTEGER";
  return "REAL";
}

struct Envelope {
  double min_x = std::numeric_limits<double>::infinity();
  double max_x = -std::numeric_limits<double>::infinity();
  double min_y = std::numeric_limits<double>::infinity();
  double max_y = -std::numeric_limits<double>::infinity();

  void add(LonLat p) {
    min_x = std::min(min_x, p.lon);
    max_x = std::max(max_x, p.lon);
    min_y = std::min(min_y, p.lat);
    max_y = std::max(max_y, p.lat);
  }
  void add(const geojson::Geometry& g) {
    if (const auto* p = std::get_if<LonLat>(&g)) {
      add(*p);
    } else {
      for (const LonLat& q : std::get<std::vector<LonLat>>(g)) add(q);
    }
  }
  bool empty() const { return min_x > max_x; }
};

}  // namespace

std::string encode_geometry(const geojson::Geometry& geometry, int srs_id) {
  Envelope env;
  env.add(geometry);
  std::string out = "GP";
  out.push_back('\0');              // version 1
  out.push_back(static_cast<char>(0x03));  // little-endian, envelope [minx,maxx,miny,maxy]
  put<std::int32_t>(out, srs_id);
  put(out, env.min_x);
  put(out, env.max_x);
  put(out, env.min_y);
  put(out, env.max_y);
  out.push_back('\x01');  // WKB little-endian
  if (const auto* p = std::get_if<LonLat>(&geometry)) {
    put<std::uint32_t>(out, 1);
    put(out, p->lon);
    put(out, p->lat);
  } else {
    const auto& line = std::get<std::vector<LonLat>>(geometry);
    put<std::uint32_t>(out, 2);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(line.size()));
    for (const LonLat& q : line) {
      put(out, q.lon);
      put(out, q.lat);
    }
  }
  return out;
}

void write_geopackage(const std::filesystem::path& path, const std::vector<Layer>& layers) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::remove(path);
  Db db(path);
  db.exec("PRAGMA application_id = 1196444487; PRAGMA user_version = 10300;");
  db.exec("BEGIN");
  db.exec(R"(CREATE TABLE gpkg_spatial_ref_sys (
  srs_name TEXT NOT NULL, srs_id INTEGER NOT NULL PRIMARY KEY, organization TEXT NOT NULL,
  organization_coordsys_id INTEGER NOT NULL, definition TEXT NOT NULL, description TEXT))");
  db.exec(R"(INSERT INTO gpkg_spatial_ref_sys VALUES
  ('Undefined cartesian SRS', -1, 'NONE', -1, 'undefined', 'undefined cartesian coordinate reference system'),
  ('Undefined geographic SRS', 0, 'NONE', 0, 'undefined', 'undefined geographic coordinate reference system'),
  ('WGS 84 geodetic', 4326, 'EPSG', 4326, 'GEOGCS["WGS 84",DATUM["WGS_1984",SPHEROID["WGS 84",6378137,298.257223563,AUTHORITY["EPSG","7030"]],AUTHORITY["EPSG","6326"]],PRIMEM["Greenwich",0,AUTHORITY["EPSG","8901"]],UNIT["degree",0.0174532925199433,AUTHORITY["EPSG","9122"]],AXIS["Latitude",NORTH],AXIS["Longitude",EAST],AUTHORITY["EPSG","4326"]]', 'longitude/latitude coordinates in decimal degrees on the WGS 84 spheroid'))");
  db.exec(R"(CREATE TABLE gpkg_contents (
  table_name TEXT NOT NULL PRIMARY KEY, data_type TEXT NOT NULL, identifier TEXT UNIQUE,
  description TEXT DEFAULT '', last_change DATETIME NOT NULL DEFAULT (strftime('%Y-%m-%dT%H:%M:%fZ','now')),
  min_x DOUBLE, min_y DOUBLE, max_x DOUBLE, max_y DOUBLE, srs_id INTEGER,
  CONSTRAINT fk_gc_r_srs_id FOREIGN KEY (srs_id) REFERENCES gpkg_spatial_ref_sys(srs_id)))");
  db.exec(R"(CREATE TABLE gpkg_geometry_columns (
  table_name TEXT NOT NULL, column_name TEXT NOT NULL, geometry_type_name TEXT NOT NULL,
  srs_id INTEGER NOT NULL, z TINYINT NOT NULL, m TINYINT NOT NULL,
  CONSTRAINT pk_geom_cols PRIMARY KEY (table_name, column_name),
  CONSTRAINT fk_gc_tn FOREIGN KEY (table_name) REFERENCES gpkg_contents(table_name),
  CONSTRAINT fk_gc_srs FOREIGN KEY (srs_id) REFERENCES gpkg_spatial_ref_sys (srs_id)))");

  for (const Layer& layer : layers) {
    // Column order follows first appearance; type follows the first non-null value.
    std::vector<std::string> columns;
    std::map<std::string, std::string> types;
    bool is_point = true;
    Envelope env;
    for (const auto& f : layer.features) {
      is_point = std::holds_alternative<LonLat>(f.geometry);
      env.add(f.geometry);
      for (const auto& [key, value] : f.properties.items()) {
        if (!types.contains(key)) {
          columns.push_back(key);
          types[key] = "";
        }
        if (types[key].empty() && !value.is_null()) types[key] = column_type(value);
      }
    }
    std::string create = fmt::format("CREATE TABLE {} (fid INTEGER PRIMARY KEY AUTOINCREMENT, geom {}",
                                     quote_ident(layer.name), is_point ? "POINT" : "LINESTRING");
    for (const auto& c : columns) {
      create += fmt::format(", {} {}", quote_ident(c), types[c].empty() ? "REAL" : types[c]);
    }
    create += ")";
    db.exec(create);

    {
      Statement contents(db,
                         "INSERT INTO gpkg_contents (table_name, data_type, identifier, min_x, "
                         "min_y, max_x, max_y, srs_id, last_change) VALUES (?, 'features', ?, ?, "
                         "?, ?, ?, 4326, '1970-01-01T00:00:00.000Z')");
      sqlite3_bind_text(contents.get(), 1, layer.name.c_str(), -1, SQLITE_TRANSIENT);
      sqlite3_bind_text(contents.get(), 2, layer.name.c_str(), -1, SQLITE_TRANSIENT);
      if (!env.empty()) {
        sqlite3_bind_double(contents.get(), 3, env.min_x);
        sqlite3_bind_double(contents.get(), 4, env.min_y);
        sqlite3_bind_double(contents.get(), 5, env.max_x);
        sqlite3_bind_double(contents.get(), 6, env.max_y);
      }
      contents.step_reset();
      Statement geom_cols(db, "INSERT INTO gpkg_geometry_columns VALUES (?, 'geom', ?, 4326, 0, 0)");
      sqlite3_bind_text(geom_cols.get(), 1, layer.name.c_str(), -1, SQLITE_TRANSIENT);
      sqlite3_bind_text(geom_cols.get(), 2, is_point ? "POINT" : "LINESTRING", -1, SQLITE_STATIC);
      geom_cols.step_reset();
    }

    std::string insert = fmt::format("INSERT INTO {} (geom", quote_ident(layer.name));
    std::string params = "?";
    for (const auto& c : columns) {
      insert += ", " + quote_ident(c);
      params += ", ?";
    }
    insert += ") VALUES (" + params + ")";
    Statement stmt(db, insert);
    for (const auto& f : layer.features) {
      const std::string blob = encode_geometry(f.geometry);
      sqlite3_bind_blob(stmt.get(), 1, blob.data(), static_cast<int>(blob.size()), SQLITE_TRANSIENT);
      for (std::size_t i = 0; i < columns.size(); ++i) {
        const int idx = static_cast<int>(i) + 2;
        const auto it = f.properties.find(columns[i]);
        if (it == f.properties.end() || it->is_null()) {
          sqlite3_bind_null(stmt.get(), idx);
        } else if (it->is_string()) {
          const auto s = it->get<std::string>();
          sqlite3_bind_text(stmt.get(), idx, s.c_str(), -1, SQLITE_TRANSIENT);
        } else if (it->is_boolean()) {
          sqlite3_bind_int64(stmt.get(), idx, it->get<bool>() ? 1 : 0);
        } else if (it->is_number_integer()) {
          sqlite3_bind_int64(stmt.get(), idx, it->get<std::int64_t>());
        } else {
          sqlite3_bind_double(stmt.get(), idx, it->get<double>());
        }
      }
      stmt.step_reset();
    }
  }
  db.exec("COMMIT");
}

}  // namespace streetscape::gpkg

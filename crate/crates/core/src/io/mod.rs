//! Device files and sweep CSV.

mod csv;
mod device_file;

pub use csv::{read_csv, sweep_header, write_sweep_csv, CsvError, CsvTable};
pub use device_file::{parse_device, serialize_device, DeviceFile, ParseError, ParseErrorKind};

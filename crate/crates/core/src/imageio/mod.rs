//! Images, bilinear sampling, backward warping, and flow-field files.

mod flo;
mod flow;
mod image;
mod pnm;
mod warp;

pub use self::image::{load_image, save_image, Image};
pub use flo::{decode_flo, encode_flo, meta_path, read_flo, write_flo, FLO_MAGIC};
pub use flow::FlowField;
pub use pnm::{decode_pnm, encode_pnm};
pub(crate) use warp::nearest_valid;
pub use warp::{warp_backward, InvalidPixels};

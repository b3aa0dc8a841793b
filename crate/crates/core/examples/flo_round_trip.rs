//! Writes and reads a `.flo` file; validity and scores travel in the sidecar.

use proposal_flow::imageio::meta_path;
use proposal_flow::prelude::*;

fn main() -> Result<()> {
    let dir = std::env::temp_dir().join("proposalflow-flo-example");
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let path = dir.join("ramp.flo");

    let mut flow = FlowField::constant(8, 6, 0.0, 0.0);
    for y in 0..6 {
        for x in 0..8 {
            let i = flow.index(x, y);
            flow.u[i] = x as f32 * 0.5;
            flow.v[i] = -(y as f32);
            flow.score[i] = 0.1 * x as f64;
            flow.valid[i] = (x + y) % 5 != 0;
        }
    }
    write_flo(&flow, &path)?;
    let back = read_flo(&path)?;
    println!("wrote {} and {}", path.display(), meta_path(&path).display());
    println!("identical after reading back: {}", back == flow);
    Ok(())
}

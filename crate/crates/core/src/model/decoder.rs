use super::params::Decoder;
use crate::error::{dim_err, Result};
use crate::graph::{Graph, Var};

/// `[T, C, h, w] -> [T, 3, 2h, 2w]`: channel expansion, pixel shuffle and
/// two refining convolutions.
pub fn decoder_forward(g: &mut Graph, z: Var, p: &Decoder<Var>) -> Result<Var> {
    if g.shape(z).len() != 4 {
        return Err(dim_err!("decoder expects [T, C, h, w], got {:?}", g.shape(z)));
    }
    let y = g.conv2d(z, p.expand.weight, p.expand.bias, 1, 1)?;
    let y = g.pixel_shuffle(y, 2)?;
    let y = g.relu(y);
    let y = g.conv2d(y, p.conv1.weight, p.conv1.bias, 1, 1)?;
    let y = g.relu(y);
    g.conv2d(y, p.conv2.weight, p.conv2.bias, 1, 1)
}

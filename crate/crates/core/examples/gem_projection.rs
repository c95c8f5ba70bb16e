//! Project a gradient so it does not increase the loss on remembered tasks.

use regime_lab::methods::gem_project;
use regime_lab::ParamVector;

fn main() -> regime_lab::Result<()> {
    let g = ParamVector::from(vec![1.0, -1.0, 0.5]);
    let refs = vec![
        ParamVector::from(vec![-1.0, 0.0, 0.0]),
        ParamVector::from(vec![0.0, 1.0, 1.0]),
        ParamVector::from(vec![0.2, 0.2, 0.2]),
    ];
    for (k, r) in refs.iter().enumerate() {
        println!("before: <g, g_{k}> = {:+.4}", g.dot(r));
    }
    let proj = gem_project(&g, &refs, 0.0)?;
    println!("projected = {}, sweeps = {}, multipliers = {:?}", proj.projected, proj.sweeps, proj.multipliers);
    for (k, r) in refs.iter().enumerate() {
        println!("after:  <g~, g_{k}> = {:+.4}", proj.gradient.dot(r));
    }
    println!("g~ = {:?}", &proj.gradient[..]);
    Ok(())
}

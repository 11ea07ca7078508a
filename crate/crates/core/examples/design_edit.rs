//! Edit the default quadruped and round-trip it through XML.
//!
//! cargo run --example design_edit

use codesign::morphology::{
    apply_edit, default_design, derive_layout, parse_design, serialize_design, DesignBounds,
    DesignEdit, ParamChange,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let base = default_design();
    let bounds = DesignBounds::default();
    let edit = DesignEdit {
        changes: vec![
            ParamChange::relative("torso_length", 0.2),
            // a bare leg path edits both legs
            ParamChange::relative("lower_len", -0.1),
            ParamChange::absolute("rear.attach_frac", 0.15),
        ],
        rationale: "longer body, shorter shins".into(),
    };
    let edited = apply_edit(&base, &edit, &bounds)?;
    for id in base.changed_params(&edited) {
        println!("{id:<20} {:.4} -> {:.4}", base.get(id), edited.get(id));
    }

    // Relative edits beyond max_edit_frac are clamped, not rejected.
    let big = DesignEdit {
        changes: vec![ParamChange::relative("torque_limit", 5.0)],
        rationale: String::new(),
    };
    println!(
        "torque_limit after +500%: {}",
        apply_edit(&base, &big, &bounds)?.front.torque_limit
    );

    let bad = DesignEdit {
        changes: vec![ParamChange::relative("tail_len", 0.1)],
        rationale: String::new(),
    };
    println!(
        "unknown path: {}",
        apply_edit(&base, &bad, &bounds).unwrap_err()
    );

    let xml = serialize_design(&edited);
    assert_eq!(parse_design(&xml)?, edited);
    println!("\n{xml}");

    let layout = derive_layout(&edited);
    println!(
        "total mass {:.3} kg, standing height {:.3} m",
        layout.total_mass(),
        layout.standing_height
    );
    for l in &layout.links {
        println!(
            "  {:<12} length {:.3} m, mass {:.3} kg",
            l.name, l.length, l.mass
        );
    }
    Ok(())
}

// Debug: max nodal displacement error on HEXA for VEM vs UCP k=2.
use vem2d::element::*;
use vem2d::mesh::{generate_mesh, MeshFamily, Point2};
use vem2d::problems::*;
use vem2d::solver::*;

fn main() {
    let mat = Material::new(2.5, 0.25, Model::PlaneStress).unwrap();
    let problem = load_case_a();
    for method in [Method::Vem, Method::Ucp] {
        print!("{method:?} nodal L-inf:");
        for n in [4u32, 8, 16, 32] {
            let mesh = generate_mesh(MeshFamily::Hexa, n).unwrap();
            let spec = ElementSpec::new(method, 2);
            let elements: Vec<_> = (0..mesh.cells.len())
                .map(|c| build_element(mesh.cell_points(c), &spec, &mat, None).unwrap())
                .collect();
            let mut sys = assemble(&mesh, &elements, true).unwrap();
            sys.apply_dirichlet(|p: Point2| {
                let v = problem.displacement(p);
                [v[0], v[1]]
            });
            let sol = solve(&sys).unwrap();
            let mut worst = 0.0_f64;
            for (v, p) in mesh.points.iter().enumerate() {
                let exact = problem.displacement(*p);
                worst = worst
                    .max((sol.dofs[2 * v] - exact[0]).abs())
                    .max((sol.dofs[2 * v + 1] - exact[1]).abs());
            }
            print!(" {worst:.3e}");
        }
        println!();
    }
}
